//! Zero-order oracle: noisy evaluations of `f(x, xi)` and two-point
//! directional differences.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::problems::{check_sample, Problem};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    None,
    /// `eta ~ Uniform[-delta, delta]`, drawn independently per evaluation.
    UniformBounded,
    /// `f` rounded to the nearest multiple of `delta` (error at most `delta / 2`).
    Rounding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Smoothing radius of the two-point difference.
    pub tau: f64,
    /// Corruption bound: every emitted `|f_hat - f| <= delta`.
    pub delta: f64,
    pub noise: NoiseKind,
}

impl OracleConfig {
    pub fn noiseless(tau: f64) -> Self {
        Self {
            tau,
            delta: 0.0,
            noise: NoiseKind::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!(
                "smoothing parameter tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Config(format!(
                "oracle noise bound delta must be nonnegative, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Perturbation direction for a two-point difference.
#[derive(Debug, Clone, Copy)]
pub enum Direction<'a> {
    /// One-hot at `(row, col)`; vectors use `col = 0`.
    Coordinate { row: usize, col: usize },
    Dense(&'a Point),
}

/// Single-owner oracle with its own noise stream and call counter.
#[derive(Debug, Clone)]
pub struct Oracle {
    cfg: OracleConfig,
    evaluations: u64,
    rng: ChaCha8Rng,
}

impl Oracle {
    pub fn new(cfg: OracleConfig, rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            evaluations: 0,
            rng,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    /// Total single-point evaluations so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Returns `f(x, xi_sample) + eta` with `|eta| <= delta`.
    pub fn evaluate(&mut self, problem: &dyn Problem, x: &Point, sample: usize) -> Result<f64> {
        problem.shape().check(x)?;
        check_sample(problem, sample)?;
        Ok(self.evaluate_unchecked(problem, x, sample))
    }

    fn evaluate_unchecked(&mut self, problem: &dyn Problem, x: &Point, sample: usize) -> f64 {
        self.evaluations += 1;
        let f = problem.sample_value(x, sample);
        let delta = self.cfg.delta;
        if delta == 0.0 {
            return f;
        }
        match self.cfg.noise {
            NoiseKind::None => f,
            NoiseKind::UniformBounded => f + self.rng.random_range(-delta..=delta),
            NoiseKind::Rounding => (f / delta).round() * delta,
        }
    }

    /// `(f_hat(x + tau e, xi) - f_hat(x - tau e, xi)) / (2 tau)` with the same
    /// sample for both evaluations and independent noise on each.
    pub fn two_point_diff(
        &mut self,
        problem: &dyn Problem,
        x: &Point,
        direction: Direction<'_>,
        sample: usize,
    ) -> Result<f64> {
        let shape = problem.shape();
        shape.check(x)?;
        check_sample(problem, sample)?;
        let tau = self.cfg.tau;
        let (plus, minus) = match direction {
            Direction::Coordinate { row, col } => {
                if row >= shape.rows() || col >= shape.cols() {
                    return Err(Error::Domain(format!(
                        "coordinate ({row}, {col}) outside {shape}"
                    )));
                }
                let mut probe = x.clone();
                let base = x[(row, col)];
                probe[(row, col)] = base + tau;
                let plus = self.evaluate_unchecked(problem, &probe, sample);
                probe[(row, col)] = base - tau;
                let minus = self.evaluate_unchecked(problem, &probe, sample);
                (plus, minus)
            }
            Direction::Dense(e) => {
                shape.check(e)?;
                if e.iter().all(|v| *v == 0.0) {
                    return Err(Error::Domain("perturbation direction is zero".into()));
                }
                let plus = self.evaluate_unchecked(problem, &(x + e * tau), sample);
                let minus = self.evaluate_unchecked(problem, &(x - e * tau), sample);
                (plus, minus)
            }
        };
        Ok((plus - minus) / (2.0 * tau))
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    use super::*;
    use crate::problems::Quadratic;
    use crate::rng::{substream, Purpose};
    use crate::Shape;

    #[derive(Debug)]
    struct Fn1 {
        d: usize,
        f: fn(&Point) -> f64,
    }

    impl Problem for Fn1 {
        fn name(&self) -> &'static str {
            "fn"
        }
        fn shape(&self) -> Shape {
            Shape::Vector(self.d)
        }
        fn sample_count(&self) -> usize {
            1
        }
        fn smoothness(&self) -> f64 {
            1.0
        }
        fn sample_smoothness(&self, _: usize) -> f64 {
            1.0
        }
        fn sigma(&self) -> f64 {
            0.0
        }
        fn f_star(&self) -> Option<f64> {
            None
        }
        fn x_star(&self) -> Option<Point> {
            None
        }
        fn initial_point(&self) -> Point {
            Point::zeros(self.d, 1)
        }
        fn sample_value(&self, x: &Point, _: usize) -> f64 {
            (self.f)(x)
        }
        fn sample_gradient(&self, _: &Point, _: usize) -> Point {
            unimplemented!()
        }
    }

    fn oracle(tau: f64, delta: f64, noise: NoiseKind) -> Oracle {
        Oracle::new(
            OracleConfig { tau, delta, noise },
            substream(1, Purpose::OracleNoise),
        )
        .unwrap()
    }

    fn half_norm_sq() -> Quadratic {
        Quadratic::from_parts(Point::identity(2, 2), vec![Point::zeros(2, 1)]).unwrap()
    }

    #[test]
    fn noiseless_value() {
        let p = half_norm_sq();
        let x = Point::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(oracle(0.1, 0.0, NoiseKind::None).evaluate(&p, &x, 0).unwrap(), 0.5);
    }

    #[test]
    fn uniform_noise_within_bound() {
        let p = half_norm_sq();
        let x = Point::from_column_slice(2, 1, &[1.0, 0.0]);
        let mut o = oracle(0.1, 1e-3, NoiseKind::UniformBounded);
        for _ in 0..1000 {
            let v = o.evaluate(&p, &x, 0).unwrap();
            assert!((0.499..=0.501).contains(&v), "{v}");
        }
        assert_eq!(o.evaluations(), 1000);
    }

    #[test]
    fn rounding_noise_within_bound() {
        let p = half_norm_sq();
        let mut o = oracle(0.1, 1e-2, NoiseKind::Rounding);
        for k in 0..200 {
            let x = Point::from_column_slice(2, 1, &[0.013 * k as f64, -0.7]);
            let v = o.evaluate(&p, &x, 0).unwrap();
            assert!((v - p.sample_value(&x, 0)).abs() <= 1e-2);
        }
    }

    #[test]
    fn square_two_point_is_exact() {
        let p = Fn1 { d: 1, f: |x| x[0] * x[0] };
        let mut o = oracle(0.1, 0.0, NoiseKind::None);
        let x = dmatrix![1.0];
        let v = o
            .two_point_diff(&p, &x, Direction::Coordinate { row: 0, col: 0 }, 0)
            .unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        assert_eq!(o.evaluations(), 2);
    }

    #[test]
    fn constant_and_l1_differences() {
        let c = Fn1 { d: 2, f: |_| 3.5 };
        let mut o = oracle(0.5, 0.0, NoiseKind::None);
        let x = Point::from_column_slice(2, 1, &[2.0, 2.0]);
        let e = Point::from_column_slice(2, 1, &[0.3, -1.0]);
        assert_eq!(o.two_point_diff(&c, &x, Direction::Dense(&e), 0).unwrap(), 0.0);
        let l1 = Fn1 {
            d: 2,
            f: |x| x.iter().map(|v| v.abs()).sum(),
        };
        let v = o
            .two_point_diff(&l1, &x, Direction::Coordinate { row: 0, col: 0 }, 0)
            .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn errors() {
        let p = half_norm_sq();
        assert!(matches!(
            Oracle::new(OracleConfig::noiseless(0.0), substream(0, Purpose::OracleNoise)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Oracle::new(OracleConfig::noiseless(-1.0), substream(0, Purpose::OracleNoise)),
            Err(Error::Config(_))
        ));
        let mut o = oracle(0.1, 0.0, NoiseKind::None);
        assert!(matches!(
            o.evaluate(&p, &Point::zeros(3, 1), 0),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            o.evaluate(&p, &Point::zeros(2, 1), 4),
            Err(Error::InvalidSample { .. })
        ));
        let zero = Point::zeros(2, 1);
        assert!(o.two_point_diff(&p, &zero, Direction::Dense(&zero), 0).is_err());
        assert_eq!(o.evaluations(), 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = half_norm_sq();
        let x = Point::from_column_slice(2, 1, &[0.2, 0.9]);
        let run = || {
            let mut o = oracle(0.1, 1e-3, NoiseKind::UniformBounded);
            (0..10)
                .map(|_| o.evaluate(&p, &x, 0).unwrap().to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
