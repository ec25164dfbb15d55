//! Synthetic finite-sum objectives `f(x) = (1/N) sum_k f(x, xi_k)` with
//! certified smoothness and gradient-variance constants.
//!
//! Every problem stores its samples explicitly, so `L`, `sigma` and (where
//! known) `f*` and `x*` are exact properties of the stored data rather than
//! estimates. Exact gradients are exposed for diagnostics only; optimizers
//! see a problem solely through the [`crate::oracle::Oracle`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result, Shape};

pub trait Problem: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn shape(&self) -> Shape;

    /// Number of stored samples; `xi` is uniform over `0..sample_count()`.
    fn sample_count(&self) -> usize;

    /// Smoothness constant `L` used by tuning presets and bounds.
    fn smoothness(&self) -> f64;

    /// Per-sample smoothness `L(xi_k)`.
    fn sample_smoothness(&self, sample: usize) -> f64;

    /// Bound on `E ||grad f(x, xi) - grad f(x)||^2` (as `sigma`, not squared).
    fn sigma(&self) -> f64;

    fn f_star(&self) -> Option<f64>;

    fn x_star(&self) -> Option<Point>;

    fn initial_point(&self) -> Point;

    /// Side length of the box `[-r, r]^d` on which `smoothness()` is
    /// certified, when it is not global.
    fn certified_radius(&self) -> Option<f64> {
        None
    }

    /// Noiseless `f(x, xi_k)`. Callers validate `x` and `sample`.
    fn sample_value(&self, x: &Point, sample: usize) -> f64;

    fn sample_gradient(&self, x: &Point, sample: usize) -> Point;

    /// Full-batch objective.
    fn value(&self, x: &Point) -> f64 {
        let n = self.sample_count();
        (0..n).map(|k| self.sample_value(x, k)).sum::<f64>() / n as f64
    }

    /// Full-batch gradient, if the problem exposes one.
    fn gradient(&self, x: &Point) -> Option<Point> {
        let n = self.sample_count();
        let mut g = self.shape().zeros();
        for k in 0..n {
            g += self.sample_gradient(x, k);
        }
        Some(g / n as f64)
    }
}

pub type SharedProblem = Arc<dyn Problem>;

pub fn check_sample(problem: &dyn Problem, sample: usize) -> Result<()> {
    let count = problem.sample_count();
    if sample < count {
        Ok(())
    } else {
        Err(Error::InvalidSample {
            index: sample,
            count,
        })
    }
}

pub fn exact_gradient(problem: &dyn Problem, x: &Point) -> Result<Point> {
    problem.shape().check(x)?;
    problem.gradient(x).ok_or_else(|| {
        Error::Unsupported(format!("{} does not expose exact gradients", problem.name()))
    })
}

/// Empirical `E_k ||grad f(x, xi_k) - grad f(x)||^2` over the stored samples.
pub fn gradient_variance(problem: &dyn Problem, x: &Point) -> Result<f64> {
    let mean = exact_gradient(problem, x)?;
    let n = problem.sample_count();
    let total: f64 = (0..n)
        .map(|k| (problem.sample_gradient(x, k) - &mean).norm_squared())
        .sum();
    Ok(total / n as f64)
}

/// Serializable description of a built-in problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        d: usize,
        #[serde(default = "one")]
        condition_number: f64,
        #[serde(default)]
        sigma: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "one")]
        smoothness: f64,
        #[serde(default)]
        seed: u64,
    },
    Logistic {
        d: usize,
        #[serde(default = "default_logistic_samples")]
        samples: usize,
        #[serde(default)]
        label_noise: f64,
        #[serde(default)]
        seed: u64,
    },
    Rosenbrock {
        d: usize,
        #[serde(default)]
        seed: u64,
    },
    MatrixRegression {
        rows: usize,
        cols: usize,
        rank: usize,
        #[serde(default)]
        sigma: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_samples() -> usize {
    16
}

fn default_logistic_samples() -> usize {
    200
}

impl ProblemSpec {
    pub fn build(&self) -> Result<SharedProblem> {
        Ok(match *self {
            ProblemSpec::Quadratic {
                d,
                condition_number,
                sigma,
                samples,
                smoothness,
                seed,
            } => Arc::new(Quadratic::new(
                d,
                condition_number,
                sigma,
                samples,
                smoothness,
                seed,
            )?),
            ProblemSpec::Logistic {
                d,
                samples,
                label_noise,
                seed,
            } => Arc::new(Logistic::new(d, samples, label_noise, seed)?),
            ProblemSpec::Rosenbrock { d, seed } => Arc::new(Rosenbrock::new(d, seed)?),
            ProblemSpec::MatrixRegression {
                rows,
                cols,
                rank,
                sigma,
                samples,
                seed,
            } => Arc::new(MatrixRegression::new(rows, cols, rank, sigma, samples, seed)?),
        })
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    // fix column signs so the distribution does not depend on QR conventions
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Centers `raw` deviations and rescales them so that
/// `mean_k ||map(u_k)||^2 == sigma^2`.
fn calibrate_deviations(
    mut raw: Vec<DMatrix<f64>>,
    sigma: f64,
    map: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    let n = raw.len();
    let mut mean = DMatrix::zeros(raw[0].nrows(), raw[0].ncols());
    for u in &raw {
        mean += u;
    }
    mean /= n as f64;
    for u in &mut raw {
        *u -= &mean;
    }
    if sigma == 0.0 {
        return raw.into_iter().map(|u| u * 0.0).collect();
    }
    let current = raw.iter().map(|u| map(u).norm_squared()).sum::<f64>() / n as f64;
    let scale = sigma / current.sqrt();
    raw.into_iter().map(|u| u * scale).collect()
}

/// `f(x, xi_k) = 1/2 (x - b_k)^T A (x - b_k)` with SPD `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
    shifts: Vec<Point>,
    mean_shift: Point,
    lipschitz: f64,
    sigma: f64,
    f_star: f64,
}

impl Quadratic {
    /// Random rotation of log-spaced eigenvalues in `[L / kappa, L]`; the
    /// per-sample shifts are calibrated so the gradient variance is exactly
    /// `sigma^2` at every point. The start point is the origin.
    pub fn new(
        d: usize,
        condition_number: f64,
        sigma: f64,
        samples: usize,
        smoothness: f64,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("quadratic needs d >= 1".into()));
        }
        if !(condition_number.is_finite() && condition_number >= 1.0) {
            return Err(Error::Config("condition_number must be >= 1".into()));
        }
        if !(smoothness.is_finite() && smoothness > 0.0) {
            return Err(Error::Config("smoothness must be positive".into()));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Config("sigma must be nonnegative".into()));
        }
        if samples == 0 || (sigma > 0.0 && samples < 2) {
            return Err(Error::Config(
                "sigma > 0 needs at least two samples".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_orthogonal(&mut rng, d);
        let eig = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| {
            if d == 1 {
                smoothness
            } else {
                smoothness * condition_number.powf(-(i as f64) / (d - 1) as f64)
            }
        }));
        let a = &q * eig * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let mean_shift = gaussian_matrix(&mut rng, d, 1);
        let raw = (0..samples).map(|_| gaussian_matrix(&mut rng, d, 1)).collect();
        let devs = calibrate_deviations(raw, sigma, |u| &a * u);
        let shifts = devs.iter().map(|u| &mean_shift + u).collect();
        let mut quad = Self::assemble(a, shifts);
        quad.lipschitz = smoothness;
        Ok(quad)
    }

    /// Builds a quadratic from an explicit SPD matrix and shift set; `L` is
    /// the largest eigenvalue of `a` and `sigma` the exact empirical spread.
    pub fn from_parts(a: DMatrix<f64>, shifts: Vec<Point>) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d || shifts.is_empty() {
            return Err(Error::Config("need a square matrix and at least one shift".into()));
        }
        for b in &shifts {
            Shape::Vector(d).check(b)?;
        }
        let eig = SymmetricEigen::new(a.clone());
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::Config("matrix must be positive definite".into()));
        }
        let mut quad = Self::assemble(a, shifts);
        quad.lipschitz = eig.eigenvalues.max();
        Ok(quad)
    }

    fn assemble(a: DMatrix<f64>, shifts: Vec<Point>) -> Self {
        let n = shifts.len() as f64;
        let d = a.nrows();
        let mut mean_shift = Point::zeros(d, 1);
        for b in &shifts {
            mean_shift += b;
        }
        mean_shift /= n;
        let mut var = 0.0;
        let mut f_star = 0.0;
        for b in &shifts {
            let u = b - &mean_shift;
            let au = &a * &u;
            var += au.norm_squared();
            f_star += 0.5 * u.dot(&au);
        }
        Self {
            a,
            shifts,
            mean_shift,
            lipschitz: 0.0,
            sigma: (var / n).sqrt(),
            f_star: f_star / n,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn shifts(&self) -> &[Point] {
        &self.shifts
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn shape(&self) -> Shape {
        Shape::Vector(self.a.nrows())
    }

    fn sample_count(&self) -> usize {
        self.shifts.len()
    }

    fn smoothness(&self) -> f64 {
        self.lipschitz
    }

    fn sample_smoothness(&self, _sample: usize) -> f64 {
        self.lipschitz
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn f_star(&self) -> Option<f64> {
        Some(self.f_star)
    }

    fn x_star(&self) -> Option<Point> {
        Some(self.mean_shift.clone())
    }

    fn initial_point(&self) -> Point {
        Point::zeros(self.a.nrows(), 1)
    }

    fn sample_value(&self, x: &Point, sample: usize) -> f64 {
        let r = x - &self.shifts[sample];
        0.5 * r.dot(&(&self.a * &r))
    }

    fn sample_gradient(&self, x: &Point, sample: usize) -> Point {
        &self.a * (x - &self.shifts[sample])
    }

    fn value(&self, x: &Point) -> f64 {
        let r = x - &self.mean_shift;
        0.5 * r.dot(&(&self.a * &r)) + self.f_star
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        Some(&self.a * (x - &self.mean_shift))
    }
}

/// Binary logistic regression over Gaussian features, labels in `{-1, +1}`.
#[derive(Debug, Clone)]
pub struct Logistic {
    /// One row per sample.
    features: DMatrix<f64>,
    labels: Vec<f64>,
    lipschitz: f64,
    sample_lipschitz: Vec<f64>,
    sigma: f64,
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    /// Labels are `sign(z^T w + label_noise * N(0,1))` for a hidden Gaussian
    /// `w`. `L = lambda_max(Z^T Z / (4N))`; `sigma = sqrt(mean ||z_k||^2)`
    /// bounds the gradient spread because `|sigmoid| <= 1`.
    pub fn new(d: usize, samples: usize, label_noise: f64, seed: u64) -> Result<Self> {
        if d == 0 || samples == 0 {
            return Err(Error::Config("logistic needs d >= 1 and samples >= 1".into()));
        }
        if !(label_noise.is_finite() && label_noise >= 0.0) {
            return Err(Error::Config("label_noise must be nonnegative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = gaussian_matrix(&mut rng, d, 1);
        let features = gaussian_matrix(&mut rng, samples, d);
        let labels = (0..samples)
            .map(|k| {
                let noise: f64 = rng.sample(StandardNormal);
                let margin = features.row(k).transpose().dot(&w) + label_noise * noise;
                if margin >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Ok(Self::from_data(features, labels))
    }

    pub fn from_data(features: DMatrix<f64>, labels: Vec<f64>) -> Self {
        let n = features.nrows() as f64;
        let gram = features.tr_mul(&features) / (4.0 * n);
        let lipschitz = SymmetricEigen::new(gram).eigenvalues.max();
        let sq: Vec<f64> = features.row_iter().map(|r| r.norm_squared()).collect();
        let sample_lipschitz = sq.iter().map(|s| 0.25 * s).collect();
        let sigma = (sq.iter().sum::<f64>() / n).sqrt();
        Self {
            features,
            labels,
            lipschitz,
            sample_lipschitz,
            sigma,
        }
    }

    fn margin(&self, x: &Point, sample: usize) -> f64 {
        self.labels[sample] * self.features.row(sample).transpose().dot(x)
    }
}

impl Problem for Logistic {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn shape(&self) -> Shape {
        Shape::Vector(self.features.ncols())
    }

    fn sample_count(&self) -> usize {
        self.labels.len()
    }

    fn smoothness(&self) -> f64 {
        self.lipschitz
    }

    fn sample_smoothness(&self, sample: usize) -> f64 {
        self.sample_lipschitz[sample]
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn f_star(&self) -> Option<f64> {
        None
    }

    fn x_star(&self) -> Option<Point> {
        None
    }

    fn initial_point(&self) -> Point {
        Point::zeros(self.features.ncols(), 1)
    }

    fn sample_value(&self, x: &Point, sample: usize) -> f64 {
        softplus(-self.margin(x, sample))
    }

    fn sample_gradient(&self, x: &Point, sample: usize) -> Point {
        let weight = -self.labels[sample] * sigmoid(-self.margin(x, sample));
        Point::from_iterator(self.features.ncols(), 1, self.features.row(sample).iter().map(|v| v * weight))
    }
}

/// Chained Rosenbrock function `sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2`.
/// Deterministic (one sample). `L` is a Gershgorin bound on the Hessian over
/// the box `[-2, 2]^d` only.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    d: usize,
    lipschitz: f64,
    initial: Point,
}

pub const ROSENBROCK_BOX: f64 = 2.0;

impl Rosenbrock {
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Config("rosenbrock needs d >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let initial = Point::from_fn(d, 1, |i, _| {
            let base = if i % 2 == 0 { -1.2 } else { 1.0 };
            base + rng.random_range(-0.1..0.1)
        });
        Ok(Self {
            d,
            lipschitz: Self::box_bound(d, ROSENBROCK_BOX),
            initial,
        })
    }

    fn box_bound(d: usize, r: f64) -> f64 {
        (0..d)
            .map(|i| {
                let mut row = 0.0;
                if i + 1 < d {
                    row += 1200.0 * r * r + 400.0 * r + 2.0 + 400.0 * r;
                }
                if i > 0 {
                    row += 200.0 + 400.0 * r;
                }
                row
            })
            .fold(0.0, f64::max)
    }
}

impl Problem for Rosenbrock {
    fn name(&self) -> &'static str {
        "rosenbrock"
    }

    fn shape(&self) -> Shape {
        Shape::Vector(self.d)
    }

    fn sample_count(&self) -> usize {
        1
    }

    fn smoothness(&self) -> f64 {
        self.lipschitz
    }

    fn sample_smoothness(&self, _sample: usize) -> f64 {
        self.lipschitz
    }

    fn sigma(&self) -> f64 {
        0.0
    }

    fn f_star(&self) -> Option<f64> {
        Some(0.0)
    }

    fn x_star(&self) -> Option<Point> {
        Some(Point::from_element(self.d, 1, 1.0))
    }

    fn initial_point(&self) -> Point {
        self.initial.clone()
    }

    fn certified_radius(&self) -> Option<f64> {
        Some(ROSENBROCK_BOX)
    }

    fn sample_value(&self, x: &Point, _sample: usize) -> f64 {
        (0..self.d - 1)
            .map(|i| {
                let a = x[i + 1] - x[i] * x[i];
                let b = 1.0 - x[i];
                100.0 * a * a + b * b
            })
            .sum()
    }

    fn sample_gradient(&self, x: &Point, _sample: usize) -> Point {
        let mut g = Point::zeros(self.d, 1);
        for i in 0..self.d - 1 {
            let a = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * a;
        }
        g
    }
}

/// `f(X, xi_k) = 1/2 ||A X - B_k||_F^2` with a shared design `A` whose
/// singular values span `[0.5, 1]` (so `L = 1`) and targets
/// `B_k = A X_true + D_k`, where `X_true` has the requested rank and the
/// centered deviations `D_k` are scaled so the gradient variance is exactly
/// `sigma^2` everywhere. The start point is `X = 0`.
#[derive(Debug, Clone)]
pub struct MatrixRegression {
    design: DMatrix<f64>,
    targets: Vec<DMatrix<f64>>,
    mean_target: DMatrix<f64>,
    lipschitz: f64,
    sigma: f64,
    f_star: f64,
    x_star: DMatrix<f64>,
}

impl MatrixRegression {
    pub fn new(
        rows: usize,
        cols: usize,
        rank: usize,
        sigma: f64,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("matrix regression needs positive dimensions".into()));
        }
        if rank == 0 || rank > rows.min(cols) {
            return Err(Error::Config(format!(
                "rank must be in 1..={} for a {rows}x{cols} problem",
                rows.min(cols)
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Config("sigma must be nonnegative".into()));
        }
        if samples == 0 || (sigma > 0.0 && samples < 2) {
            return Err(Error::Config("sigma > 0 needs at least two samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthogonal(&mut rng, rows);
        let v = random_orthogonal(&mut rng, rows);
        let spectrum = nalgebra::DVector::from_fn(rows, |i, _| {
            if rows == 1 {
                1.0
            } else {
                1.0 - 0.5 * i as f64 / (rows - 1) as f64
            }
        });
        let design = &u * DMatrix::from_diagonal(&spectrum) * v.transpose();
        let left = gaussian_matrix(&mut rng, rows, rank);
        let right = gaussian_matrix(&mut rng, rank, cols);
        let x_true = left * right / (rank as f64).sqrt();
        let mean_target = &design * &x_true;
        let raw = (0..samples)
            .map(|_| gaussian_matrix(&mut rng, rows, cols))
            .collect();
        let devs = calibrate_deviations(raw, sigma, |d| design.tr_mul(d));
        let f_star = devs.iter().map(|d| 0.5 * d.norm_squared()).sum::<f64>() / samples as f64;
        let sigma = (devs.iter().map(|d| design.tr_mul(d).norm_squared()).sum::<f64>()
            / samples as f64)
            .sqrt();
        let targets = devs.iter().map(|d| &mean_target + d).collect();
        Ok(Self {
            lipschitz: spectrum.max().powi(2),
            design,
            targets,
            mean_target,
            sigma,
            f_star,
            x_star: x_true,
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn targets(&self) -> &[DMatrix<f64>] {
        &self.targets
    }
}

impl Problem for MatrixRegression {
    fn name(&self) -> &'static str {
        "matrix-regression"
    }

    fn shape(&self) -> Shape {
        Shape::Matrix {
            rows: self.design.ncols(),
            cols: self.mean_target.ncols(),
        }
    }

    fn sample_count(&self) -> usize {
        self.targets.len()
    }

    fn smoothness(&self) -> f64 {
        self.lipschitz
    }

    fn sample_smoothness(&self, _sample: usize) -> f64 {
        self.lipschitz
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn f_star(&self) -> Option<f64> {
        Some(self.f_star)
    }

    fn x_star(&self) -> Option<Point> {
        Some(self.x_star.clone())
    }

    fn initial_point(&self) -> Point {
        self.shape().zeros()
    }

    fn sample_value(&self, x: &Point, sample: usize) -> f64 {
        0.5 * (&self.design * x - &self.targets[sample]).norm_squared()
    }

    fn sample_gradient(&self, x: &Point, sample: usize) -> Point {
        self.design.tr_mul(&(&self.design * x - &self.targets[sample]))
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * (&self.design * x - &self.mean_target).norm_squared() + self.f_star
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        Some(self.design.tr_mul(&(&self.design * x - &self.mean_target)))
    }
}

#[cfg(test)]
mod tests {
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::dmatrix;

    use super::*;

    fn col(v: &[f64]) -> Point {
        Point::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn isotropic_noiseless_quadratic() {
        let q = Quadratic::new(3, 1.0, 0.0, 1, 2.0, 5).unwrap();
        let b = q.x_star().unwrap();
        assert_abs_diff_eq!(q.f_star().unwrap(), 0.0);
        let x = col(&[0.3, -1.0, 2.0]);
        assert_relative_eq!(
            q.value(&x),
            0.5 * 2.0 * (&x - &b).norm_squared(),
            max_relative = 1e-12
        );
        assert_abs_diff_eq!(q.gradient(&b).unwrap(), Point::zeros(3, 1), epsilon = 1e-14);
    }

    #[test]
    fn two_sample_variance_closed_form() {
        // b1 = -b2 = (c, 0): Var = ||A (c, 0)||^2; pick c so that it equals sigma^2 = 4
        let a = dmatrix![2.0, 0.5; 0.5, 1.0];
        let col0_norm = (2.0f64 * 2.0 + 0.5 * 0.5).sqrt();
        let c = 2.0 / col0_norm;
        let q = Quadratic::from_parts(a, vec![col(&[c, 0.0]), col(&[-c, 0.0])]).unwrap();
        assert_relative_eq!(q.sigma(), 2.0, max_relative = 1e-14);
        for x in [col(&[0.0, 0.0]), col(&[5.0, -3.0])] {
            assert_relative_eq!(gradient_variance(&q, &x).unwrap(), 4.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn calibrated_quadratic_hits_sigma() {
        let q = Quadratic::new(6, 10.0, 0.7, 8, 1.0, 11).unwrap();
        assert_relative_eq!(q.sigma(), 0.7, max_relative = 1e-12);
        let eig = SymmetricEigen::new(q.matrix().clone()).eigenvalues;
        assert_relative_eq!(eig.max(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(eig.min(), 0.1, max_relative = 1e-10);
    }

    #[test]
    fn quadratic_rejects_bad_input() {
        assert!(Quadratic::new(0, 1.0, 0.0, 1, 1.0, 0).is_err());
        assert!(Quadratic::new(2, 0.5, 0.0, 1, 1.0, 0).is_err());
        assert!(Quadratic::new(2, 1.0, 1.0, 1, 1.0, 0).is_err());
    }

    #[test]
    fn logistic_at_zero() {
        let p = Logistic::new(4, 50, 0.1, 3).unwrap();
        let zero = p.initial_point();
        assert_relative_eq!(p.value(&zero), std::f64::consts::LN_2, max_relative = 1e-15);
        // direct formula: grad f(0) = -(1/N) sum_k y_k z_k / 2
        let mut expected = Point::zeros(4, 1);
        for k in 0..50 {
            expected -= p.features.row(k).transpose() * (0.5 * p.labels[k]);
        }
        expected /= 50.0;
        assert_abs_diff_eq!(p.gradient(&zero).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn logistic_descends_on_separable_data() {
        let p = Logistic::new(3, 80, 0.0, 9).unwrap();
        let mut x = p.initial_point();
        let step = 1.0 / p.smoothness();
        let mut prev = p.value(&x);
        for _ in 0..50 {
            x -= p.gradient(&x).unwrap() * step;
            let next = p.value(&x);
            assert!(next < prev);
            prev = next;
        }
    }

    #[test]
    fn rosenbrock_closed_forms() {
        let p = Rosenbrock::new(5, 0).unwrap();
        assert_eq!(p.value(&Point::from_element(5, 1, 1.0)), 0.0);
        assert_eq!(p.value(&Point::zeros(5, 1)), 4.0);
        // hand differentiation at the origin: -2 everywhere except the last coordinate
        assert_eq!(
            p.gradient(&Point::zeros(5, 1)).unwrap().as_slice(),
            &[-2.0, -2.0, -2.0, -2.0, 0.0]
        );
        let p2 = Rosenbrock::new(2, 0).unwrap();
        assert_eq!(p2.gradient(&Point::zeros(2, 1)).unwrap().as_slice(), &[-2.0, 0.0]);
        assert_eq!(p2.smoothness(), 6402.0);
        assert_eq!(p.smoothness(), 7402.0);
    }

    #[test]
    fn matrix_regression_closed_forms() {
        let p = MatrixRegression::new(5, 3, 2, 0.4, 6, 1).unwrap();
        assert_relative_eq!(p.sigma(), 0.4, max_relative = 1e-12);
        let x_star = p.x_star().unwrap();
        assert_abs_diff_eq!(p.gradient(&x_star).unwrap(), Point::zeros(5, 3), epsilon = 1e-12);
        let zero = p.initial_point();
        let mut expected = Point::zeros(5, 3);
        for b in p.targets() {
            expected -= p.design().tr_mul(b);
        }
        expected /= p.sample_count() as f64;
        assert_abs_diff_eq!(p.gradient(&zero).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(p.value(&x_star), p.f_star().unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn one_by_one_regression_is_scalar_quadratic() {
        let p = MatrixRegression::new(1, 1, 1, 0.0, 1, 4).unwrap();
        let a = p.design()[(0, 0)];
        let b = p.targets()[0][(0, 0)];
        assert_relative_eq!(a.abs(), 1.0, max_relative = 1e-15);
        let x = dmatrix![0.7];
        assert_relative_eq!(p.value(&x), 0.5 * (a * 0.7 - b).powi(2), max_relative = 1e-14);
        assert_eq!(p.shape(), Shape::Matrix { rows: 1, cols: 1 });
    }

    #[test]
    fn spec_round_trip_and_unknown_kind() {
        let spec = ProblemSpec::MatrixRegression {
            rows: 4,
            cols: 3,
            rank: 2,
            sigma: 0.0,
            samples: 1,
            seed: 2,
        };
        let p = spec.build().unwrap();
        assert_eq!(p.shape(), Shape::Matrix { rows: 4, cols: 3 });
        assert!(MatrixRegression::new(4, 3, 4, 0.0, 1, 0).is_err());
        assert!(Rosenbrock::new(1, 0).is_err());
    }

    #[test]
    fn exact_gradient_checks_shape() {
        let q = Quadratic::new(3, 1.0, 0.0, 1, 1.0, 0).unwrap();
        assert!(matches!(
            exact_gradient(&q, &Point::zeros(2, 1)),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(check_sample(&q, 1).is_err());
    }
}
