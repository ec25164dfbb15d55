//! Property and theory-check suites behind `jaguar check`.
//!
//! Each suite is deterministic: instances come from fixed seeds and parallel
//! work is collected in a fixed order, so re-running a suite reproduces
//! every reported number bit for bit.

use jaguar_core::diagnostics::{
    check_polar_inner_product, check_step_lemma, fit_convergence_slope, mean_std, slope_points,
    track_momentum_error, SlopeAxis, DEFAULT_BOUND_CONSTANT,
};
use jaguar_core::estimators::full_coordinate_estimate_with;
use jaguar_core::linalg::{newton_schulz, polar_reference};
use jaguar_core::optimizers::{
    param_count, run, Optimizer, OptimizerConfig, OptimizerKind, RunTrace, TuningPreset,
};
use jaguar_core::oracle::{Oracle, OracleConfig};
use jaguar_core::problems::{exact_gradient, MatrixRegression, Problem, Quadratic, Rosenbrock};
use jaguar_core::rng::{substream, Purpose};
use jaguar_core::Point;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{HarnessError, Result};
use crate::presets;
use crate::runner::{execute, RunOutcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub suite: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Every number the suite reports, for replay comparison.
    pub numbers: Vec<f64>,
}

impl Outcome {
    fn new(suite: &'static str, passed: bool, detail: String, numbers: Vec<f64>) -> Self {
        Self {
            suite,
            passed,
            detail,
            numbers,
        }
    }

    /// True when `other` reports the same verdict and bit-identical numbers.
    pub fn same_bits(&self, other: &Outcome) -> bool {
        self.suite == other.suite
            && self.passed == other.passed
            && self.detail == other.detail
            && self.numbers.len() == other.numbers.len()
            && self
                .numbers
                .iter()
                .zip(&other.numbers)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.detail
        )
    }
}

type SuiteFn = fn() -> Result<Outcome>;

/// Suites in the order `check all` runs them.
pub const SUITES: &[(&str, SuiteFn)] = &[
    ("param-count", param_count_audit),
    ("estimator", estimator_exactness),
    ("newton-schulz", newton_schulz_fidelity),
    ("lemma1", momentum_error_bound),
    ("lemma2", polar_inner_product_suite),
    ("lemma3", step_lemma_suite),
    ("slope", slope_in_iterations),
    ("tau-optimum", tau_optimum),
    ("beta-ablation", beta_ablation),
    ("muon", muon_convergence),
];

pub fn suite_names() -> Vec<String> {
    let mut names: Vec<String> = SUITES.iter().map(|(n, _)| n.to_string()).collect();
    names.push("determinism".into());
    names.push("all".into());
    names
}

/// Runs a named suite. `all` runs every suite once; `determinism` runs every
/// suite twice and compares the reported numbers.
pub fn run_named(name: &str) -> Result<Vec<Outcome>> {
    match name {
        "all" => SUITES.iter().map(|(_, f)| f()).collect(),
        "determinism" => {
            let first: Vec<Outcome> = SUITES.iter().map(|(_, f)| f()).collect::<Result<_>>()?;
            Ok(vec![determinism(&first)?])
        }
        _ => {
            let (_, f) = SUITES
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| HarnessError::Unknown {
                    what: "check suite",
                    name: name.to_string(),
                    known: suite_names(),
                })?;
            Ok(vec![f()?])
        }
    }
}

/// Re-runs every suite that produced `first` and compares all numbers.
pub fn determinism(first: &[Outcome]) -> Result<Outcome> {
    let mut mismatched = Vec::new();
    let mut count = 0usize;
    for outcome in first {
        let (_, f) = SUITES
            .iter()
            .find(|(n, _)| *n == outcome.suite)
            .expect("outcome from a known suite");
        let again = f()?;
        count += outcome.numbers.len();
        if !outcome.same_bits(&again) {
            mismatched.push(outcome.suite);
        }
    }
    let passed = mismatched.is_empty();
    let detail = if passed {
        format!("{} suites re-run, {count} numbers bit-identical", first.len())
    } else {
        format!("numbers differ on re-run: {}", mismatched.join(", "))
    };
    Ok(Outcome::new("determinism", passed, detail, vec![count as f64]))
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Point {
    Point::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Point {
    Point::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
}

fn noiseless_oracle(tau: f64) -> Result<Oracle> {
    Ok(Oracle::new(
        OracleConfig::noiseless(tau),
        substream(0, Purpose::OracleNoise),
    )?)
}

/// Live persisted-scalar counts after one step, against `2d + 1`, `2d`,
/// `2mn + 1` and `2mn`.
pub fn param_count_audit() -> Result<Outcome> {
    let cfg = OptimizerConfig::new(1e-3, 0.9, 1e-3, 1, 0);
    let mut numbers = Vec::new();
    let mut wrong = Vec::new();
    let mut check = |kind: OptimizerKind, problem: &dyn Problem, expected: usize| -> Result<()> {
        let mut opt = Optimizer::new(kind, problem, &cfg)?;
        opt.step(problem)?;
        let live = opt.persisted_scalars();
        numbers.push(live as f64);
        if live != expected || param_count(kind, problem.shape()) != expected {
            wrong.push(format!("{kind} on {}: {live} != {expected}", problem.shape()));
        }
        Ok(())
    };
    for d in [1usize, 10, 1000] {
        // Rosenbrock is cheap at d = 1000 but starts at d = 2
        let problem: Box<dyn Problem> = if d == 1 {
            Box::new(Quadratic::from_parts(DMatrix::identity(1, 1), vec![Point::zeros(1, 1)])?)
        } else {
            Box::new(Rosenbrock::new(d, 0)?)
        };
        check(OptimizerKind::JaguarSignSgd, problem.as_ref(), 2 * d + 1)?;
        check(OptimizerKind::ZoSgd, problem.as_ref(), 2 * d)?;
        check(OptimizerKind::ZoSignSgd, problem.as_ref(), 2 * d)?;
    }
    for (m, n) in [(1usize, 1usize), (4, 3), (64, 32)] {
        let p = MatrixRegression::new(m, n, 1, 0.0, 1, 0)?;
        check(OptimizerKind::JaguarMuon, &p, 2 * m * n + 1)?;
        check(OptimizerKind::ZoMuon, &p, 2 * m * n)?;
    }
    let passed = wrong.is_empty();
    let detail = if passed {
        format!("{} configurations match the table counts", numbers.len())
    } else {
        wrong.join("; ")
    };
    Ok(Outcome::new("param-count", passed, detail, numbers))
}

/// Full coordinate estimates on noiseless quadratics against exact gradients.
pub fn estimator_exactness() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for d in [1usize, 2, 4, 8, 16, 32, 64] {
        for seed in 0..3u64 {
            let q = Quadratic::new(d, 10.0, 0.0, 1, 1.0, seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let x = uniform_matrix(&mut rng, d, 1, 2.0);
            let g = exact_gradient(&q, &x)?;
            for tau in [1e-3, 1e-1] {
                let est = full_coordinate_estimate_with(&q, &x, &mut noiseless_oracle(tau)?, 0)?;
                worst = worst.max((est - &g).norm() / g.norm());
                cases += 1;
            }
        }
    }
    Ok(Outcome::new(
        "estimator",
        worst <= 1e-10,
        format!("worst relative error {worst:.3e} over {cases} cases (tolerance 1e-10)"),
        vec![worst],
    ))
}

/// Random full-rank matrix with condition number at most 10.
fn conditioned_matrix(seed: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=16usize);
    let cols = rng.random_range(1..=rows.min(8));
    let kappa: f64 = rng.random_range(1.0..=10.0);
    let u = gaussian_matrix(&mut rng, rows, cols).qr().q();
    let v = gaussian_matrix(&mut rng, cols, cols).qr().q();
    let spectrum = nalgebra::DVector::from_fn(cols, |i, _| {
        if cols == 1 {
            1.0
        } else {
            kappa.powf(i as f64 / (cols - 1) as f64)
        }
    });
    u * DMatrix::from_diagonal(&spectrum) * v.transpose()
}

/// Slack on "nonincreasing" once the error sits at rounding level.
pub const MONOTONE_SLACK: f64 = 1e-12;

pub fn newton_schulz_fidelity() -> Result<Outcome> {
    let per: Vec<Result<(f64, f64, f64, f64)>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let a = conditioned_matrix(seed);
            let reference = polar_reference(&a)?;
            let mut prev = f64::INFINITY;
            let mut worst_rise = f64::NEG_INFINITY;
            let mut last = 0.0;
            for k in 1..=60 {
                let err = (newton_schulz(&a, k)?.q - &reference).norm();
                worst_rise = worst_rise.max(err - prev);
                prev = err;
                last = err;
            }
            let r1 = newton_schulz(&a, 1)?.residual;
            let r5 = newton_schulz(&a, 5)?.residual;
            Ok((last, worst_rise, r5, r5 - r1))
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let max_final = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_rise = per.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let max_r5 = per.iter().map(|p| p.2).fold(0.0, f64::max);
    let max_excess = per.iter().map(|p| p.3).fold(f64::NEG_INFINITY, f64::max);
    let residual_ok = max_excess <= MONOTONE_SLACK;
    let passed = max_final <= 1e-6 && max_rise <= MONOTONE_SLACK && residual_ok;
    let mut numbers: Vec<f64> = per.iter().map(|p| p.2).collect();
    numbers.extend([max_final, max_rise, max_r5, max_excess]);
    Ok(Outcome::new(
        "newton-schulz",
        passed,
        format!(
            "100 matrices: max error at K=60 {max_final:.3e}, largest step-to-step rise {max_rise:.3e}, \
             max K=5 residual {max_r5:.3e}, largest K=5 minus K=1 residual {max_excess:.3e}"
        ),
        numbers,
    ))
}

fn run_seeds(
    kind: OptimizerKind,
    problem: &dyn Problem,
    base: &OptimizerConfig,
    seeds: std::ops::Range<u64>,
) -> Result<Vec<RunTrace>> {
    let traces: Vec<_> = seeds
        .into_par_iter()
        .map(|seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            run(kind, problem, &cfg)
        })
        .collect();
    Ok(traces.into_iter().collect::<jaguar_core::Result<Vec<_>>>()?)
}

/// Momentum-error bound with `C = 16` over the default grid.
pub fn momentum_error_bound() -> Result<Outcome> {
    let mut numbers = Vec::new();
    let mut failing = Vec::new();
    let mut worst_c = 0.0f64;
    for d in [2usize, 8, 32] {
        let q = Quadratic::new(d, 10.0, 1.0, 16, 1.0, 0)?;
        for gamma in [1e-3, 1e-2] {
            for beta in [0.0, 0.9, 0.99] {
                let cfg = OptimizerConfig::new(gamma, beta, 1e-2, 5 * d * d, 0);
                let traces = run_seeds(OptimizerKind::JaguarSignSgd, &q, &cfg, 0..20)?;
                let report = track_momentum_error(&traces, &q, DEFAULT_BOUND_CONSTANT)?;
                numbers.push(report.violation_fraction);
                numbers.push(report.smallest_passing_constant);
                worst_c = worst_c.max(report.smallest_passing_constant);
                if report.violation_fraction > 0.0 {
                    failing.push(format!(
                        "d={d} gamma={gamma} beta={beta}: {}",
                        report.violation_fraction
                    ));
                }
            }
        }
    }
    let passed = failing.is_empty();
    let detail = if passed {
        format!("18 cells, 20 seeds each, no violations at C = 16; smallest passing C {worst_c:.3}")
    } else {
        format!("violations: {}", failing.join("; "))
    };
    Ok(Outcome::new("lemma1", passed, detail, numbers))
}

pub fn polar_inner_product_suite() -> Result<Outcome> {
    let mut min_margin = f64::INFINITY;
    let mut failures = 0usize;
    let mut opposite_ratio = 0.0f64;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.random_range(1..=8usize);
        let cols = rng.random_range(1..=5usize);
        let a = gaussian_matrix(&mut rng, rows, cols);
        let b = gaussian_matrix(&mut rng, rows, cols);
        let random = check_polar_inner_product(&a, &b)?;
        let opposite = check_polar_inner_product(&a, &(-&a))?;
        for c in [random, opposite] {
            min_margin = min_margin.min(c.margin);
            failures += usize::from(!c.passed);
        }
        opposite_ratio = opposite_ratio.max(opposite.lhs / opposite.rhs);
    }
    Ok(Outcome::new(
        "lemma2",
        failures == 0,
        format!(
            "1000 random pairs plus B = -A each: {failures} violations, smallest margin {min_margin:.3e}, \
             lhs/rhs at B = -A at most {opposite_ratio:.6}"
        ),
        vec![failures as f64, min_margin, opposite_ratio],
    ))
}

pub fn step_lemma_suite() -> Result<Outcome> {
    let checks: Vec<Result<_>> = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.random_range(1..=8usize);
            let cols = rng.random_range(1..=5usize);
            let rank = rng.random_range(1..=rows.min(cols));
            let sigma = rng.random_range(0.0..1.0);
            let p = MatrixRegression::new(rows, cols, rank, sigma, 4, seed)?;
            let x = uniform_matrix(&mut rng, rows, cols, 2.0);
            let m = gaussian_matrix(&mut rng, rows, cols);
            let gamma = 10f64.powf(rng.random_range(-4.0..0.0));
            Ok(check_step_lemma(&x, &m, &p, gamma)?)
        })
        .collect();
    let checks = checks.into_iter().collect::<Result<Vec<_>>>()?;
    let failures = checks.iter().filter(|c| !c.passed).count();
    let min_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    Ok(Outcome::new(
        "lemma3",
        failures == 0,
        format!("1000 instances: {failures} violations, smallest margin {min_margin:.3e}"),
        vec![failures as f64, min_margin],
    ))
}

fn run_preset(name: &str, sweep: Option<(&str, Vec<Value>)>) -> Result<Vec<RunOutcome>> {
    let mut cfg = presets::load(name)?;
    if let Some((key, values)) = sweep {
        cfg.sweep.insert(
            key.to_string(),
            values.into_iter().map(|v| toml_value(&v)).collect(),
        );
    }
    execute(&cfg.expand()?, rayon::current_num_threads())
}

fn toml_value(v: &Value) -> toml::Value {
    match v {
        Value::Number(n) if n.is_i64() => toml::Value::Integer(n.as_i64().unwrap_or_default()),
        Value::Number(n) => toml::Value::Float(n.as_f64().unwrap_or_default()),
        other => toml::Value::String(other.to_string()),
    }
}

/// Per sweep point: mean and standard deviation of the final gradient
/// criterion and the number of runs.
fn final_grad_by_point(outcomes: &[RunOutcome]) -> Vec<(f64, f64, usize)> {
    let points = outcomes.iter().map(|o| o.spec.point).max().map_or(0, |p| p + 1);
    (0..points)
        .map(|p| {
            let values: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.spec.point == p)
                .map(|o| o.trace.final_record().grad_norm)
                .collect();
            let (mean, std) = mean_std(&values);
            (mean, std, values.len())
        })
        .collect()
}

/// Slope of the returned-iterate criterion against `T` under optimal tuning.
pub fn slope_in_iterations() -> Result<Outcome> {
    let outcomes = run_preset("slope-T", None)?;
    let traces: Vec<RunTrace> = outcomes.into_iter().map(|o| o.trace).collect();
    let slope = fit_convergence_slope(&traces, SlopeAxis::Iterations)?;
    let points = slope_points(&traces, SlopeAxis::Iterations);
    let mut numbers = vec![slope];
    numbers.extend(points.iter().map(|p| p.1));
    let means = points
        .iter()
        .map(|(t, m, _)| format!("T={t}: {m:.4e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome::new(
        "slope",
        (slope + 0.5).abs() <= 0.15,
        format!("fitted slope {slope:.4} (target -0.5 +- 0.15); {means}"),
        numbers,
    ))
}

/// Location of the final-error minimum over the smoothing-radius grid.
pub fn tau_optimum() -> Result<Outcome> {
    let cfg = presets::load("tau-optimum")?;
    let taus: Vec<f64> = cfg.sweep["optimizer.tau"]
        .iter()
        .map(|v| v.as_float().unwrap_or(f64::NAN))
        .collect();
    let problem = cfg.problem.build()?;
    let delta = cfg.optimizer.config.delta;
    let target_tau = (delta / problem.smoothness()).sqrt();
    let outcomes = execute(&cfg.expand()?, rayon::current_num_threads())?;
    let curve = final_grad_by_point(&outcomes);
    let best = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map_or(0, |(i, _)| i);
    let target = taus
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.ln() - target_tau.ln())
                .abs()
                .total_cmp(&(b.1.ln() - target_tau.ln()).abs())
        })
        .map_or(0, |(i, _)| i);
    let shown = taus
        .iter()
        .zip(&curve)
        .map(|(t, (m, s, n))| format!("{t:.2e}: {m:.4e} (se {:.1e})", s / (*n as f64).sqrt()))
        .collect::<Vec<_>>()
        .join(", ");
    let mut numbers: Vec<f64> = curve.iter().flat_map(|(m, s, _)| [*m, *s]).collect();
    numbers.push(best as f64);
    Ok(Outcome::new(
        "tau-optimum",
        best.abs_diff(target) <= 1,
        format!(
            "minimum at tau = {:.2e} (grid index {best}), sqrt(delta/L) = {target_tau:.2e} \
             (grid index {target}); curve {shown}",
            taus[best]
        ),
        numbers,
    ))
}

/// Final gradient criterion at `beta = 0.9` against `beta = 0` on the noisy
/// quadratic.
pub fn beta_ablation() -> Result<Outcome> {
    let outcomes = run_preset(
        "beta-ablation",
        Some(("optimizer.beta", vec![Value::from(0.0), Value::from(0.9)])),
    )?;
    let curve = final_grad_by_point(&outcomes);
    let (m0, s0, n0) = curve[0];
    let (m9, s9, n9) = curve[1];
    let se = (s0 * s0 / n0 as f64 + s9 * s9 / n9 as f64).sqrt();
    let margin = m0 - m9;
    Ok(Outcome::new(
        "beta-ablation",
        margin > 0.0 && margin >= 2.0 * se,
        format!(
            "mean final l1 gradient {m0:.4e} at beta=0, {m9:.4e} at beta=0.9 ({n0} seeds); \
             margin {margin:.3e} = {:.1} pooled standard errors",
            margin / se
        ),
        vec![m0, s0, m9, s9, margin, se],
    ))
}

/// JAGUAR Muon on noiseless 8x4 matrix regression with optimal matrix tuning.
pub fn muon_convergence() -> Result<Outcome> {
    let p = MatrixRegression::new(8, 4, 2, 0.0, 16, 0)?;
    let mut cfg = OptimizerConfig::new(0.0, 0.0, 1e-3, 200_000, 0);
    cfg.preset = TuningPreset::Optimal;
    let traces = run_seeds(OptimizerKind::JaguarMuon, &p, &cfg, 0..5)?;
    let ratios: Vec<f64> = traces
        .iter()
        .map(|t| t.initial.grad_norm / t.final_record().grad_norm)
        .collect();
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Outcome::new(
        "muon",
        worst >= 100.0,
        format!(
            "Schatten-1 gradient reduced by {} over 2e5 iterations (need >= 100 on all 5 seeds)",
            ratios
                .iter()
                .map(|r| format!("{r:.1}x"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        ratios,
    ))
}
