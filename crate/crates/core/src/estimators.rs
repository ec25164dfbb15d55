//! Zero-order gradient estimators.
//!
//! The JAGUAR estimator keeps a momentum buffer with the shape of the
//! variable and refreshes one uniformly sampled coordinate per call:
//! `m_i <- beta * m_i + (1 - beta) * diff_i`, every other entry untouched.
//! Besides `x` and `m` it persists only the last scalar difference.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::oracle::{Direction, Oracle};
use crate::problems::Problem;
use crate::{Error, Point, Result, Shape};

/// Entry index `(row, col)`; vectors use `col = 0`.
pub type Coordinate = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct JaguarState {
    momentum: Point,
    iteration: u64,
    beta: f64,
    last_coord: Option<Coordinate>,
    last_diff: f64,
}

impl JaguarState {
    /// Fresh state with `m = 0`.
    pub fn new(shape: Shape, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(Self {
            momentum: shape.zeros(),
            iteration: 0,
            beta,
            last_coord: None,
            last_diff: 0.0,
        })
    }

    pub fn with_momentum(momentum: Point, beta: f64) -> Result<Self> {
        let shape = Shape::Matrix {
            rows: momentum.nrows(),
            cols: momentum.ncols(),
        };
        let mut state = Self::new(shape, beta)?;
        state.momentum = momentum;
        Ok(state)
    }

    pub fn momentum(&self) -> &Point {
        &self.momentum
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn last_coord(&self) -> Option<Coordinate> {
        self.last_coord
    }

    pub fn last_diff(&self) -> f64 {
        self.last_diff
    }

    /// Scalars this estimator keeps across iterations: the momentum buffer
    /// plus the one scalar difference.
    pub fn persisted_scalars(&self) -> usize {
        self.momentum.len() + 1
    }

    /// Folds a measured difference into one entry of the buffer.
    pub fn absorb(mut self, coord: Coordinate, diff: f64) -> Self {
        let entry = &mut self.momentum[coord];
        *entry = self.beta * *entry + (1.0 - self.beta) * diff;
        self.last_coord = Some(coord);
        self.last_diff = diff;
        self.iteration += 1;
        self
    }
}

/// Uniform `(i, j)` over the entries of `shape`, sampled as two independent
/// uniforms (row first).
pub fn sample_coordinate<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Coordinate {
    let row = rng.random_range(0..shape.rows());
    let col = if shape.cols() > 1 {
        rng.random_range(0..shape.cols())
    } else {
        0
    };
    (row, col)
}

pub fn sample_index<R: Rng + ?Sized>(problem: &dyn Problem, rng: &mut R) -> usize {
    rng.random_range(0..problem.sample_count())
}

/// One JAGUAR refresh at a given coordinate and sample.
pub fn jaguar_update_at(
    state: JaguarState,
    problem: &dyn Problem,
    x: &Point,
    oracle: &mut Oracle,
    coord: Coordinate,
    sample: usize,
) -> Result<JaguarState> {
    problem.shape().check(&state.momentum)?;
    let diff = oracle.two_point_diff(
        problem,
        x,
        Direction::Coordinate {
            row: coord.0,
            col: coord.1,
        },
        sample,
    )?;
    Ok(state.absorb(coord, diff))
}

/// Samples a coordinate then a sample id from `rng` and refreshes that entry.
pub fn jaguar_update<R: Rng + ?Sized>(
    state: JaguarState,
    problem: &dyn Problem,
    x: &Point,
    oracle: &mut Oracle,
    rng: &mut R,
) -> Result<JaguarState> {
    let coord = sample_coordinate(problem.shape(), rng);
    let sample = sample_index(problem, rng);
    jaguar_update_at(state, problem, x, oracle, coord, sample)
}

pub fn gaussian_direction<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Point {
    Point::from_fn(shape.rows(), shape.cols(), |_, _| rng.sample(StandardNormal))
}

/// `[(f_hat(x + tau E) - f_hat(x - tau E)) / (2 tau)] * E` for a given `E`.
pub fn gaussian_estimate_with(
    problem: &dyn Problem,
    x: &Point,
    oracle: &mut Oracle,
    direction: &Point,
    sample: usize,
) -> Result<Point> {
    let diff = oracle.two_point_diff(problem, x, Direction::Dense(direction), sample)?;
    Ok(direction * diff)
}

/// Draws `E` with i.i.d. standard normal entries, then a sample id.
pub fn gaussian_estimate<R: Rng + ?Sized>(
    problem: &dyn Problem,
    x: &Point,
    oracle: &mut Oracle,
    rng: &mut R,
) -> Result<Point> {
    let direction = gaussian_direction(problem.shape(), rng);
    let sample = sample_index(problem, rng);
    gaussian_estimate_with(problem, x, oracle, &direction, sample)
}

/// Two-point differences along every basis direction with one shared sample.
/// Costs `2 * len` oracle calls.
pub fn full_coordinate_estimate_with(
    problem: &dyn Problem,
    x: &Point,
    oracle: &mut Oracle,
    sample: usize,
) -> Result<Point> {
    let shape = problem.shape();
    shape.check(x)?;
    let mut g = shape.zeros();
    for col in 0..shape.cols() {
        for row in 0..shape.rows() {
            g[(row, col)] =
                oracle.two_point_diff(problem, x, Direction::Coordinate { row, col }, sample)?;
        }
    }
    Ok(g)
}

pub fn full_coordinate_estimate<R: Rng + ?Sized>(
    problem: &dyn Problem,
    x: &Point,
    oracle: &mut Oracle,
    rng: &mut R,
) -> Result<Point> {
    let sample = sample_index(problem, rng);
    full_coordinate_estimate_with(problem, x, oracle, sample)
}
