//! Instruments that compare runs with the theory: the momentum-error bound,
//! the polar-factor inner-product and Muon step inequalities, and log-log
//! convergence slopes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::linalg::{frobenius_norm, inner, polar_reference, schatten1_norm};
use crate::optimizers::RunTrace;
use crate::problems::{exact_gradient, Problem};
use crate::{Error, Point, Result, Shape};

/// Default absolute constant in front of the momentum-error bound.
pub const DEFAULT_BOUND_CONSTANT: f64 = 16.0;

/// Slack allowed when checking the two matrix inequalities.
pub const INEQUALITY_TOLERANCE: f64 = 1e-9;

pub const MIN_SLOPE_GROUPS: usize = 4;
pub const MIN_SLOPE_SEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub smoothness: f64,
    pub sigma: f64,
    pub delta: f64,
    pub tau: f64,
    pub gamma: f64,
    pub beta: f64,
    pub shape: Shape,
    /// `||grad f(x0)||^2`.
    pub initial_grad_sq: f64,
}

impl BoundConstants {
    /// Reads the constants of a run from its problem and effective config.
    pub fn from_trace(trace: &RunTrace, problem: &dyn Problem) -> Self {
        Self {
            smoothness: problem.smoothness(),
            sigma: problem.sigma(),
            delta: trace.config.delta,
            tau: trace.config.tau,
            gamma: trace.config.gamma,
            beta: trace.config.beta,
            shape: trace.shape,
            initial_grad_sq: trace.initial.grad_sq_norm,
        }
    }

    /// The five terms of the momentum-error bound after `steps` refreshes:
    /// drift `d^3 L^2 gamma^2 / (1-beta)^2`, variance `(1-beta) d sigma^2`,
    /// smoothing bias `d L^2 tau^2`, oracle noise `2 d Delta^2 / tau^2`, and
    /// the transient `(1 - (1-beta)/(2d))^steps ||grad f(x0)||^2`.
    pub fn terms(&self, steps: usize) -> [f64; 5] {
        let d = self.shape.len() as f64;
        let l2 = self.smoothness * self.smoothness;
        let one_minus_beta = 1.0 - self.beta;
        let drift = if self.gamma == 0.0 {
            0.0
        } else {
            d.powi(3) * l2 * self.gamma * self.gamma / (one_minus_beta * one_minus_beta)
        };
        let rate = 1.0 - one_minus_beta / (2.0 * d);
        [
            drift,
            one_minus_beta * d * self.sigma * self.sigma,
            d * l2 * self.tau * self.tau,
            2.0 * d * self.delta * self.delta / (self.tau * self.tau),
            rate.powi(steps.min(i32::MAX as usize) as i32) * self.initial_grad_sq,
        ]
    }

    pub fn bound(&self, constant: f64, steps: usize) -> f64 {
        constant * self.terms(steps).iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// Seed-averaged `||m - grad f(x)||^2`, one entry per iteration.
    pub observed: Vec<f64>,
    /// Standard error of each seed average.
    pub observed_stderr: Vec<f64>,
    /// `C * (sum of terms)`, from constants only.
    pub bound: Vec<f64>,
    pub violation_fraction: f64,
    pub constant: f64,
    /// Smallest `C` under which no entry would be violated.
    pub smallest_passing_constant: f64,
    pub seeds: usize,
    pub constants_used: BoundConstants,
}

/// Seed mean and sample standard deviation (`n - 1` denominator; zero for a
/// single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Compares the seed-averaged momentum error of `traces` (same configuration,
/// different seeds) with the bound evaluated from the run constants.
///
/// Record `t` holds the surrogate formed during iteration `t`, i.e. after
/// `t - 1` earlier refreshes, so it is compared with the bound at `t - 1`.
pub fn track_momentum_error(
    traces: &[RunTrace],
    problem: &dyn Problem,
    constant: f64,
) -> Result<BoundReport> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InsufficientData("no traces".into()))?;
    let len = first.records.len();
    for trace in traces {
        let mut a = trace.config.clone();
        let mut b = first.config.clone();
        a.seed = 0;
        b.seed = 0;
        if trace.kind != first.kind || trace.records.len() != len || a != b {
            return Err(Error::Config(
                "momentum tracking needs traces that differ only by seed".into(),
            ));
        }
    }
    let constants = BoundConstants::from_trace(first, problem);
    let mut observed = Vec::with_capacity(len);
    let mut observed_stderr = Vec::with_capacity(len);
    let mut bound = Vec::with_capacity(len);
    let mut violations = 0usize;
    let mut smallest = 0.0f64;
    for k in 0..len {
        let values = traces
            .iter()
            .map(|tr| {
                tr.records[k].momentum_err_sq.ok_or_else(|| {
                    Error::Unsupported(format!(
                        "{} exposes no exact gradient; momentum error was not recorded",
                        problem.name()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, std) = mean_std(&values);
        let unit = constants.bound(1.0, k);
        let b = constant * unit;
        if mean > b {
            violations += 1;
        }
        let needed = if mean <= 0.0 {
            0.0
        } else if unit > 0.0 {
            mean / unit
        } else {
            f64::INFINITY
        };
        smallest = smallest.max(needed);
        observed.push(mean);
        observed_stderr.push(std / (values.len() as f64).sqrt());
        bound.push(b);
    }
    Ok(BoundReport {
        observed,
        observed_stderr,
        bound,
        violation_fraction: if len == 0 {
            0.0
        } else {
            violations as f64 / len as f64
        },
        constant,
        smallest_passing_constant: smallest,
        seeds: traces.len(),
        constants_used: constants,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; negative beyond the tolerance means a violation.
    pub margin: f64,
    pub passed: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            margin: rhs - lhs,
            passed: lhs <= rhs + INEQUALITY_TOLERANCE,
        }
    }
}

fn same_shape(a: &Point, b: &Point) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            expected: Shape::Matrix {
                rows: a.nrows(),
                cols: a.ncols(),
            },
            actual: Shape::Matrix {
                rows: b.nrows(),
                cols: b.ncols(),
            },
        })
    }
}

/// `|<A, U_A V_A^T - U_B V_B^T>| <= 2 ||A - B||_S1` with exact polar factors.
pub fn check_polar_inner_product(a: &Point, b: &Point) -> Result<InequalityCheck> {
    same_shape(a, b)?;
    let lhs = inner(a, &(polar_reference(a)? - polar_reference(b)?)).abs();
    let rhs = 2.0 * schatten1_norm(&(a - b));
    Ok(InequalityCheck::new(lhs, rhs))
}

/// Muon step inequality for `X' = X - gamma * U_M V_M^T`:
/// `f(X') - f(X) <= -gamma ||grad f(X)||_S1 + 2 sqrt(n) gamma ||grad f(X) - M||_F + L n gamma^2 / 2`
/// with `n = min(rows, cols)` and the noiseless full-batch objective.
pub fn check_step_lemma(
    x: &Point,
    momentum: &Point,
    problem: &dyn Problem,
    gamma: f64,
) -> Result<InequalityCheck> {
    let shape = problem.shape();
    if !shape.is_matrix() {
        return Err(Error::Unsupported("step lemma needs a matrix problem".into()));
    }
    shape.check(x)?;
    shape.check(momentum)?;
    let grad = exact_gradient(problem, x)?;
    let stepped = x - polar_reference(momentum)? * gamma;
    let lhs = problem.value(&stepped) - problem.value(x);
    let n = shape.rows().min(shape.cols()) as f64;
    let rhs = -gamma * schatten1_norm(&grad)
        + 2.0 * n.sqrt() * gamma * frobenius_norm(&(&grad - momentum))
        + problem.smoothness() * n * gamma * gamma / 2.0;
    Ok(InequalityCheck::new(lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeAxis {
    /// Iteration budget `T`.
    Iterations,
    /// Number of parameters `d` (or `m * n`).
    Dimension,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least two points".into()));
    }
    if points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("axis values are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Seed-mean gradient criterion at the returned iterate, per axis value.
pub fn slope_points(traces: &[RunTrace], axis: SlopeAxis) -> Vec<(f64, f64, usize)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for trace in traces {
        let key = match axis {
            SlopeAxis::Iterations => trace.config.iterations,
            SlopeAxis::Dimension => trace.shape.len(),
        };
        groups
            .entry(key)
            .or_default()
            .push(trace.selected_record().grad_norm);
    }
    groups
        .into_iter()
        .map(|(k, v)| (k as f64, mean_std(&v).0, v.len()))
        .collect()
}

/// Fits the log-log slope of the seed-mean gradient criterion at the
/// returned iterate against `T` or `d`.
pub fn fit_convergence_slope(traces: &[RunTrace], axis: SlopeAxis) -> Result<f64> {
    let points = slope_points(traces, axis);
    if points.len() < MIN_SLOPE_GROUPS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SLOPE_GROUPS} groups along the axis, got {}",
            points.len()
        )));
    }
    if let Some((x, _, n)) = points.iter().find(|(_, _, n)| *n < MIN_SLOPE_SEEDS) {
        return Err(Error::InsufficientData(format!(
            "group at {x} has {n} seeds, need at least {MIN_SLOPE_SEEDS}"
        )));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|(x, y, _)| (*x, *y)).collect();
    loglog_slope(&xy)
}
