//! Zero-order stochastic optimizers built on the JAGUAR coordinate-momentum
//! estimator: SignSGD and Muon variants, Gaussian two-point baselines, the
//! synthetic problems they are tested on, and instruments that compare runs
//! against the known convergence bounds.
//!
//! Vectors and matrices share one representation, [`Point`], a dense
//! column-major matrix; a vector of dimension `d` is a `d x 1` matrix. The
//! declared [`Shape`] of a problem decides which interpretation applies.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod optimizers;
pub mod oracle;
pub mod problems;
pub mod rng;
mod shape;

pub use error::{Error, Result};
pub use shape::{Point, Shape};
