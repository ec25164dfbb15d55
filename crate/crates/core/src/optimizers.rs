//! Optimizer loops: JAGUAR SignSGD, JAGUAR Muon, Gaussian ZO-Muon and the
//! ZO-SGD / ZO-SignSGD baselines, plus parameter-count accounting.
//!
//! All five methods spend exactly two oracle evaluations per iteration. Every
//! run is driven by one seed (see [`crate::rng`]); diagnostics computed from
//! exact gradients are recorded out of band and never touch the oracle.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimators::{
    gaussian_estimate, jaguar_update_at, sample_coordinate, sample_index, Coordinate, JaguarState,
};
use crate::linalg::{self, DEFAULT_NS_STEPS};
use crate::oracle::{NoiseKind, Oracle, OracleConfig};
use crate::problems::Problem;
use crate::rng::{substream, Purpose};
use crate::{Error, Point, Result, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "jaguar-signsgd")]
    JaguarSignSgd,
    #[serde(rename = "jaguar-muon")]
    JaguarMuon,
    #[serde(rename = "zo-muon")]
    ZoMuon,
    #[serde(rename = "zo-sgd")]
    ZoSgd,
    #[serde(rename = "zo-signsgd")]
    ZoSignSgd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::JaguarSignSgd,
        OptimizerKind::JaguarMuon,
        OptimizerKind::ZoMuon,
        OptimizerKind::ZoSgd,
        OptimizerKind::ZoSignSgd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::JaguarSignSgd => "jaguar-signsgd",
            OptimizerKind::JaguarMuon => "jaguar-muon",
            OptimizerKind::ZoMuon => "zo-muon",
            OptimizerKind::ZoSgd => "zo-sgd",
            OptimizerKind::ZoSignSgd => "zo-signsgd",
        }
    }

    pub fn is_jaguar(&self) -> bool {
        matches!(self, OptimizerKind::JaguarSignSgd | OptimizerKind::JaguarMuon)
    }

    pub fn is_muon(&self) -> bool {
        matches!(self, OptimizerKind::JaguarMuon | OptimizerKind::ZoMuon)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningPreset {
    #[default]
    Manual,
    Arbitrary,
    Optimal,
}

/// Coordinate selection for the JAGUAR estimator. `Cyclic` sweeps entries in
/// column-major order and exists for diagnostics only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinateSampling {
    #[default]
    Uniform,
    Cyclic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_ns_steps")]
    pub ns_steps: usize,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub preset: TuningPreset,
    /// Base step for the arbitrary preset.
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    /// Estimate of `f(x0) - f*` for problems without a known optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    /// Oracle corruption bound.
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub noise: NoiseKind,
    /// `gamma_t = gamma * (1 - t / T)`. Not part of the analysed methods.
    #[serde(default)]
    pub linear_decay: bool,
    #[serde(default)]
    pub sampling: CoordinateSampling,
}

fn default_gamma() -> f64 {
    1e-3
}
fn default_beta() -> f64 {
    0.9
}
fn default_tau() -> f64 {
    1e-3
}
fn default_ns_steps() -> usize {
    DEFAULT_NS_STEPS
}
fn default_gamma0() -> f64 {
    1.0
}

impl OptimizerConfig {
    pub fn new(gamma: f64, beta: f64, tau: f64, iterations: usize, seed: u64) -> Self {
        Self {
            gamma,
            beta,
            tau,
            ns_steps: DEFAULT_NS_STEPS,
            iterations,
            seed,
            preset: TuningPreset::Manual,
            gamma0: default_gamma0(),
            delta0: None,
            delta: 0.0,
            noise: NoiseKind::None,
            linear_decay: false,
            sampling: CoordinateSampling::Uniform,
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            tau: self.tau,
            delta: self.delta,
            noise: if self.delta > 0.0 {
                self.noise
            } else {
                NoiseKind::None
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        self.oracle_config().validate()
    }

    pub fn step_size(&self, iteration: usize) -> f64 {
        if self.linear_decay {
            self.gamma * (1.0 - iteration as f64 / self.iterations as f64)
        } else {
            self.gamma
        }
    }
}

/// Dimension factor multiplying `L T` inside the optimal step size:
/// `d^2` for vector methods, `m^{3/2} n^2` (with `m >= n`) for Muon.
fn optimal_dimension_factor(kind: OptimizerKind, shape: Shape) -> f64 {
    if kind.is_muon() {
        let (m, n) = tall(shape);
        m.powf(1.5) * n * n
    } else {
        let d = shape.len() as f64;
        d * d
    }
}

fn tall(shape: Shape) -> (f64, f64) {
    let (r, c) = (shape.rows() as f64, shape.cols() as f64);
    (r.max(c), r.min(c))
}

/// Suboptimality at the start point used by the presets.
pub fn initial_gap(problem: &dyn Problem, cfg: &OptimizerConfig) -> Result<f64> {
    let x0 = problem.initial_point();
    match problem.f_star() {
        Some(f_star) => Ok((problem.value(&x0) - f_star).max(0.0)),
        None => match cfg.delta0 {
            Some(estimate) if estimate >= 0.0 => {
                log::warn!(
                    "{} has no known optimum; using the supplied delta0 = {estimate}",
                    problem.name()
                );
                Ok(estimate)
            }
            _ => Err(Error::Config(format!(
                "{} has no known optimum; tuning presets need `delta0`",
                problem.name()
            ))),
        },
    }
}

/// Applies the tuning preset and returns a manual configuration with concrete
/// `gamma`, `beta` and `tau`.
///
/// Both presets set `tau = sqrt(delta / L)`; with a noiseless oracle that
/// would be zero, so the configured `tau` is kept instead.
pub fn resolve(
    kind: OptimizerKind,
    problem: &dyn Problem,
    cfg: &OptimizerConfig,
) -> Result<OptimizerConfig> {
    let mut out = cfg.clone();
    if cfg.preset == TuningPreset::Manual {
        out.validate()?;
        return Ok(out);
    }
    let shape = problem.shape();
    let big_l = problem.smoothness();
    let t = cfg.iterations.max(1) as f64;
    let gap = initial_gap(problem, cfg)?;
    if cfg.delta > 0.0 {
        out.tau = (cfg.delta / big_l).sqrt();
    }
    match cfg.preset {
        TuningPreset::Manual => unreachable!(),
        TuningPreset::Arbitrary => {
            // d for vectors, m * n for matrices
            out.gamma = cfg.gamma0 * t.powf(-0.75) / shape.len() as f64;
            out.beta = 1.0 - t.powf(-0.5);
        }
        TuningPreset::Optimal => {
            let sigma = problem.sigma();
            let ratio = if sigma > 0.0 {
                (big_l * gap / (t * sigma * sigma)).sqrt().min(1.0)
            } else {
                1.0
            };
            out.beta = 1.0 - ratio;
            let factor = optimal_dimension_factor(kind, shape);
            out.gamma = (gap * (1.0 - out.beta) / (factor * big_l * t)).sqrt();
        }
    }
    out.preset = TuningPreset::Manual;
    out.validate()?;
    Ok(out)
}

/// Persisted scalars for each method: the variable plus the momentum buffer
/// and one scalar difference (JAGUAR), or plus one estimate buffer (Gaussian
/// two-point methods).
pub fn param_count(kind: OptimizerKind, shape: Shape) -> usize {
    let n = shape.len();
    if kind.is_jaguar() {
        2 * n + 1
    } else {
        2 * n
    }
}

fn muon_direction(momentum: &Point, ns_steps: usize) -> Result<Option<Point>> {
    if momentum.iter().all(|v| *v == 0.0) {
        return Ok(None);
    }
    Ok(Some(linalg::newton_schulz(momentum, ns_steps)?.q))
}

/// One JAGUAR SignSGD iteration at a chosen coordinate and sample.
pub fn step_jaguar_signsgd_at(
    x: &Point,
    state: JaguarState,
    problem: &dyn Problem,
    oracle: &mut Oracle,
    coord: Coordinate,
    sample: usize,
    gamma: f64,
) -> Result<(Point, JaguarState)> {
    let state = jaguar_update_at(state, problem, x, oracle, coord, sample)?;
    let next = x - linalg::sign(state.momentum()) * gamma;
    Ok((next, state))
}

/// One JAGUAR SignSGD iteration: uniform coordinate, then sample, then
/// `x' = x - gamma * sign(m)` over the full momentum.
pub fn step_jaguar_signsgd<R: Rng + ?Sized>(
    x: &Point,
    state: JaguarState,
    problem: &dyn Problem,
    oracle: &mut Oracle,
    rng: &mut R,
    gamma: f64,
) -> Result<(Point, JaguarState)> {
    let coord = sample_coordinate(problem.shape(), rng);
    let sample = sample_index(problem, rng);
    step_jaguar_signsgd_at(x, state, problem, oracle, coord, sample, gamma)
}

fn require_matrix(problem: &dyn Problem) -> Result<()> {
    if problem.shape().is_matrix() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "Muon methods need a single-matrix problem, {} is {}",
            problem.name(),
            problem.shape()
        )))
    }
}

/// One JAGUAR Muon iteration at a chosen entry and sample. A zero momentum
/// matrix leaves `X` unchanged.
#[allow(clippy::too_many_arguments)]
pub fn step_jaguar_muon_at(
    x: &Point,
    state: JaguarState,
    problem: &dyn Problem,
    oracle: &mut Oracle,
    coord: Coordinate,
    sample: usize,
    gamma: f64,
    ns_steps: usize,
) -> Result<(Point, JaguarState)> {
    require_matrix(problem)?;
    let state = jaguar_update_at(state, problem, x, oracle, coord, sample)?;
    let next = match muon_direction(state.momentum(), ns_steps)? {
        Some(q) => x - q * gamma,
        None => x.clone(),
    };
    Ok((next, state))
}

pub fn step_jaguar_muon<R: Rng + ?Sized>(
    x: &Point,
    state: JaguarState,
    problem: &dyn Problem,
    oracle: &mut Oracle,
    rng: &mut R,
    gamma: f64,
    ns_steps: usize,
) -> Result<(Point, JaguarState)> {
    require_matrix(problem)?;
    let coord = sample_coordinate(problem.shape(), rng);
    let sample = sample_index(problem, rng);
    step_jaguar_muon_at(x, state, problem, oracle, coord, sample, gamma, ns_steps)
}

/// Gaussian estimate `G`, then `X' = X - gamma * NS(G)`; `G = 0` skips the
/// step. Returns the new point and `G`.
pub fn step_zo_muon<R: Rng + ?Sized>(
    x: &Point,
    problem: &dyn Problem,
    oracle: &mut Oracle,
    rng: &mut R,
    gamma: f64,
    ns_steps: usize,
) -> Result<(Point, Point)> {
    require_matrix(problem)?;
    let g = gaussian_estimate(problem, x, oracle, rng)?;
    let next = match muon_direction(&g, ns_steps)? {
        Some(q) => x - q * gamma,
        None => x.clone(),
    };
    Ok((next, g))
}

pub fn step_zo_sgd<R: Rng + ?Sized>(
    x: &Point,
    problem: &dyn Problem,
    oracle: &mut Oracle,
    rng: &mut R,
    gamma: f64,
) -> Result<(Point, Point)> {
    let g = gaussian_estimate(problem, x, oracle, rng)?;
    Ok((x - &g * gamma, g))
}

pub fn step_zo_signsgd<R: Rng + ?Sized>(
    x: &Point,
    problem: &dyn Problem,
    oracle: &mut Oracle,
    rng: &mut R,
    gamma: f64,
) -> Result<(Point, Point)> {
    let g = gaussian_estimate(problem, x, oracle, rng)?;
    Ok((x - linalg::sign(&g) * gamma, g))
}

/// Live optimizer state for one run.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    cfg: OptimizerConfig,
    x: Point,
    jaguar: Option<JaguarState>,
    estimate: Option<Point>,
    oracle: Oracle,
    rng: ChaCha8Rng,
    iteration: usize,
}

impl Optimizer {
    /// Resolves the preset in `cfg` and starts from `problem.initial_point()`.
    pub fn new(kind: OptimizerKind, problem: &dyn Problem, cfg: &OptimizerConfig) -> Result<Self> {
        if kind.is_muon() {
            require_matrix(problem)?;
        }
        let cfg = resolve(kind, problem, cfg)?;
        let shape = problem.shape();
        let oracle = Oracle::new(cfg.oracle_config(), substream(cfg.seed, Purpose::OracleNoise))?;
        let (jaguar, estimate) = if kind.is_jaguar() {
            (Some(JaguarState::new(shape, cfg.beta)?), None)
        } else {
            (None, Some(shape.zeros()))
        };
        Ok(Self {
            kind,
            x: problem.initial_point(),
            jaguar,
            estimate,
            oracle,
            rng: substream(cfg.seed, Purpose::Algorithm),
            cfg,
            iteration: 0,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Effective (preset-resolved) configuration.
    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn point(&self) -> &Point {
        &self.x
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn jaguar_state(&self) -> Option<&JaguarState> {
        self.jaguar.as_ref()
    }

    /// The current gradient surrogate: momentum for JAGUAR methods, the last
    /// Gaussian estimate otherwise.
    pub fn surrogate(&self) -> &Point {
        match (&self.jaguar, &self.estimate) {
            (Some(state), _) => state.momentum(),
            (None, Some(g)) => g,
            (None, None) => unreachable!("optimizer always owns one buffer"),
        }
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle.evaluations()
    }

    /// Scalars held across iterations, counted from the live buffers.
    pub fn persisted_scalars(&self) -> usize {
        let buffers = match (&self.jaguar, &self.estimate) {
            (Some(state), _) => state.persisted_scalars(),
            (None, Some(g)) => g.len(),
            (None, None) => 0,
        };
        self.x.len() + buffers
    }

    fn cyclic_coordinate(&self, shape: Shape) -> Coordinate {
        let k = self.iteration % shape.len();
        (k % shape.rows(), k / shape.rows())
    }

    pub fn step(&mut self, problem: &dyn Problem) -> Result<()> {
        let gamma = self.cfg.step_size(self.iteration);
        let shape = problem.shape();
        let result = match self.kind {
            OptimizerKind::JaguarSignSgd | OptimizerKind::JaguarMuon => {
                let coord = match self.cfg.sampling {
                    CoordinateSampling::Uniform => sample_coordinate(shape, &mut self.rng),
                    CoordinateSampling::Cyclic => self.cyclic_coordinate(shape),
                };
                let sample = sample_index(problem, &mut self.rng);
                let state = self.jaguar.take().expect("jaguar state");
                let stepped = if self.kind == OptimizerKind::JaguarSignSgd {
                    step_jaguar_signsgd_at(
                        &self.x, state, problem, &mut self.oracle, coord, sample, gamma,
                    )
                } else {
                    step_jaguar_muon_at(
                        &self.x,
                        state,
                        problem,
                        &mut self.oracle,
                        coord,
                        sample,
                        gamma,
                        self.cfg.ns_steps,
                    )
                };
                stepped.map(|(x, state)| {
                    self.jaguar = Some(state);
                    x
                })
            }
            OptimizerKind::ZoMuon | OptimizerKind::ZoSgd | OptimizerKind::ZoSignSgd => {
                let stepped = match self.kind {
                    OptimizerKind::ZoMuon => step_zo_muon(
                        &self.x,
                        problem,
                        &mut self.oracle,
                        &mut self.rng,
                        gamma,
                        self.cfg.ns_steps,
                    ),
                    OptimizerKind::ZoSgd => {
                        step_zo_sgd(&self.x, problem, &mut self.oracle, &mut self.rng, gamma)
                    }
                    _ => step_zo_signsgd(&self.x, problem, &mut self.oracle, &mut self.rng, gamma),
                };
                stepped.map(|(x, g)| {
                    self.estimate = Some(g);
                    x
                })
            }
        };
        let next = result.map_err(|e| e.at_iteration(self.iteration))?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("iterate became non-finite".into()).at_iteration(self.iteration));
        }
        self.x = next;
        self.iteration += 1;
        Ok(())
    }
}

/// Metrics at the start point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialMetrics {
    pub f_value: f64,
    /// `l1` norm of the gradient for vector problems, nuclear norm for matrices.
    pub grad_norm: f64,
    /// Squared Euclidean / Frobenius norm of the gradient.
    pub grad_sq_norm: f64,
}

/// Metrics after iteration `t` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Noiseless full-batch objective at `x^t`.
    pub f_value: f64,
    /// `||grad f(x^t)||_1` (vector) or `||grad f(X^t)||_S1` (matrix).
    pub grad_norm: f64,
    /// `||m - grad f(x)||^2` for the surrogate formed during this iteration,
    /// measured at the point where it was formed (`x^{t-1}`).
    pub momentum_err_sq: Option<f64>,
    /// Cumulative optimizer oracle calls.
    pub oracle_calls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub kind: OptimizerKind,
    pub shape: Shape,
    /// Effective configuration after preset resolution.
    pub config: OptimizerConfig,
    pub initial: InitialMetrics,
    pub records: Vec<IterationRecord>,
    /// `N(T)`, uniform over `1..=T`.
    pub selected_iterate: usize,
    pub selected_point: Point,
    pub final_point: Point,
    pub oracle_calls: u64,
    /// Exact function and gradient evaluations made for metrics.
    pub diagnostic_evaluations: u64,
    /// Set when an iterate left the box on which `L` is certified.
    pub left_certified_region: bool,
}

impl RunTrace {
    pub fn selected_record(&self) -> &IterationRecord {
        &self.records[self.selected_iterate - 1]
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("traces have at least one record")
    }
}

/// Gradient criterion matching the problem geometry.
pub fn gradient_measure(shape: Shape, g: &Point) -> f64 {
    if shape.is_matrix() {
        linalg::schatten1_norm(g)
    } else {
        linalg::l1_norm(g)
    }
}

/// Runs `cfg.iterations` steps and records per-iteration metrics.
///
/// `N(T)` comes from its own random stream, so it is known up front and
/// only the selected iterate has to be retained.
pub fn run(kind: OptimizerKind, problem: &dyn Problem, cfg: &OptimizerConfig) -> Result<RunTrace> {
    let mut opt = Optimizer::new(kind, problem, cfg)?;
    let cfg = opt.config().clone();
    let shape = problem.shape();
    let total = cfg.iterations;
    let selected_iterate = substream(cfg.seed, Purpose::ReturnIndex).random_range(1..=total);
    let radius = problem.certified_radius();
    let outside = |x: &Point| radius.is_some_and(|r| x.iter().any(|v| v.abs() > r));

    let mut diagnostic_evaluations = 0u64;
    let x0 = opt.point().clone();
    let mut grad = problem.gradient(&x0);
    diagnostic_evaluations += 2;
    let initial = InitialMetrics {
        f_value: problem.value(&x0),
        grad_norm: grad.as_ref().map_or(f64::NAN, |g| gradient_measure(shape, g)),
        grad_sq_norm: grad.as_ref().map_or(f64::NAN, |g| g.norm_squared()),
    };
    let mut left_certified_region = outside(&x0);
    let mut records = Vec::with_capacity(total);
    let mut selected_point = x0;

    for t in 1..=total {
        opt.step(problem)?;
        let momentum_err_sq = grad
            .as_ref()
            .map(|g| (opt.surrogate() - g).norm_squared());
        let x = opt.point();
        grad = problem.gradient(x);
        diagnostic_evaluations += 2;
        records.push(IterationRecord {
            t,
            f_value: problem.value(x),
            grad_norm: grad.as_ref().map_or(f64::NAN, |g| gradient_measure(shape, g)),
            momentum_err_sq,
            oracle_calls: opt.oracle_calls(),
        });
        left_certified_region |= outside(x);
        if t == selected_iterate {
            selected_point = x.clone();
        }
        debug_assert_eq!(opt.persisted_scalars(), param_count(kind, shape));
    }

    Ok(RunTrace {
        kind,
        shape,
        initial,
        records,
        selected_iterate,
        selected_point,
        final_point: opt.point().clone(),
        oracle_calls: opt.oracle_calls(),
        diagnostic_evaluations,
        left_certified_region,
        config: cfg,
    })
}
