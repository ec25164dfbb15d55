use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Optimization variable. Vectors are stored as single-column matrices.
pub type Point = DMatrix<f64>;

/// Declared shape of an optimization variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Vector(usize),
    Matrix { rows: usize, cols: usize },
}

impl Shape {
    pub fn rows(&self) -> usize {
        match *self {
            Shape::Vector(d) => d,
            Shape::Matrix { rows, .. } => rows,
        }
    }

    pub fn cols(&self) -> usize {
        match *self {
            Shape::Vector(_) => 1,
            Shape::Matrix { cols, .. } => cols,
        }
    }

    /// Number of scalar entries (`d` or `m * n`).
    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self, Shape::Matrix { .. })
    }

    pub fn zeros(&self) -> Point {
        Point::zeros(self.rows(), self.cols())
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        if x.nrows() == self.rows() && x.ncols() == self.cols() {
            Ok(())
        } else {
            let actual = if x.ncols() == 1 && !self.is_matrix() {
                Shape::Vector(x.nrows())
            } else {
                Shape::Matrix {
                    rows: x.nrows(),
                    cols: x.ncols(),
                }
            };
            Err(Error::ShapeMismatch {
                expected: *self,
                actual,
            })
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Vector(d) => write!(f, "vector({d})"),
            Shape::Matrix { rows, cols } => write!(f, "matrix({rows}x{cols})"),
        }
    }
}
