#![allow(dead_code)]

use jaguar_core::problems::Problem;
use jaguar_core::{Point, Shape};

/// `f(X) = <G, X>` with a single sample; optionally hides its gradient.
#[derive(Debug)]
pub struct Linear {
    pub g: Point,
    pub x0: Point,
    pub expose_gradient: bool,
}

impl Linear {
    pub fn new(g: Point) -> Self {
        let x0 = Point::zeros(g.nrows(), g.ncols());
        Self {
            g,
            x0,
            expose_gradient: true,
        }
    }
}

impl Problem for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn shape(&self) -> Shape {
        if self.g.ncols() == 1 {
            Shape::Vector(self.g.nrows())
        } else {
            Shape::Matrix {
                rows: self.g.nrows(),
                cols: self.g.ncols(),
            }
        }
    }
    fn sample_count(&self) -> usize {
        1
    }
    fn smoothness(&self) -> f64 {
        1.0
    }
    fn sample_smoothness(&self, _: usize) -> f64 {
        0.0
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
        self.x0.clone()
    }
    fn sample_value(&self, x: &Point, _: usize) -> f64 {
        self.g.dot(x)
    }
    fn sample_gradient(&self, _: &Point, _: usize) -> Point {
        self.g.clone()
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        self.expose_gradient.then(|| self.sample_gradient(x, 0))
    }
}

/// `f(X) = ||X||_F^2 / 2` on a matrix, starting from `x0`.
#[derive(Debug)]
pub struct HalfFrobenius {
    pub x0: Point,
}

impl Problem for HalfFrobenius {
    fn name(&self) -> &'static str {
        "half-frobenius"
    }
    fn shape(&self) -> Shape {
        Shape::Matrix {
            rows: self.x0.nrows(),
            cols: self.x0.ncols(),
        }
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
        Some(0.0)
    }
    fn x_star(&self) -> Option<Point> {
        Some(Point::zeros(self.x0.nrows(), self.x0.ncols()))
    }
    fn initial_point(&self) -> Point {
        self.x0.clone()
    }
    fn sample_value(&self, x: &Point, _: usize) -> f64 {
        0.5 * x.norm_squared()
    }
    fn sample_gradient(&self, x: &Point, _: usize) -> Point {
        x.clone()
    }
}
