mod common;

use approx::assert_abs_diff_eq;
use jaguar_core::estimators::{
    gaussian_direction, gaussian_estimate, gaussian_estimate_with, jaguar_update_at, JaguarState,
};
use jaguar_core::linalg::newton_schulz;
use jaguar_core::optimizers::{step_zo_muon, step_zo_sgd};
use jaguar_core::oracle::{Oracle, OracleConfig};
use jaguar_core::problems::{exact_gradient, Problem, Quadratic};
use jaguar_core::rng::{substream, Purpose};
use jaguar_core::Point;
use nalgebra::dmatrix;

use common::Linear;

fn oracle(tau: f64) -> Oracle {
    Oracle::new(OracleConfig::noiseless(tau), substream(0, Purpose::OracleNoise)).unwrap()
}

#[test]
fn jaguar_update_is_unbiased_over_coordinates_and_samples() {
    // E[m'] = m + (1 - beta) / d * (grad f(x) - m), by enumerating every (i, xi)
    let d = 4;
    let q = Quadratic::new(d, 5.0, 0.7, 6, 1.0, 11).unwrap();
    let x = Point::from_column_slice(d, 1, &[0.3, -1.2, 2.0, 0.4]);
    let m = Point::from_column_slice(d, 1, &[1.0, 0.0, -0.5, 3.0]);
    let beta = 0.6;
    let grad = exact_gradient(&q, &x).unwrap();
    let mut mean = Point::zeros(d, 1);
    let pairs = d * q.sample_count();
    for i in 0..d {
        for k in 0..q.sample_count() {
            let state = JaguarState::with_momentum(m.clone(), beta).unwrap();
            let next = jaguar_update_at(state, &q, &x, &mut oracle(0.05), (i, 0), k).unwrap();
            mean += next.momentum() / pairs as f64;
        }
    }
    let expected = &m + (&grad - &m) * ((1.0 - beta) / d as f64);
    assert_abs_diff_eq!(mean, expected, epsilon = 1e-10);
}

#[test]
fn gaussian_estimator_error_shrinks_like_inverse_sqrt() {
    // on a noiseless quadratic E[<g, e> e] = g and E||<g, e> e - g||^2 = (d + 1)||g||^2
    let d = 6;
    let q = Quadratic::new(d, 3.0, 0.0, 1, 1.0, 2).unwrap();
    let x = Point::from_fn(d, 1, |i, _| 0.5 - i as f64 * 0.3);
    let g = exact_gradient(&q, &x).unwrap();
    let mut rng = substream(9, Purpose::Algorithm);
    let mut o = oracle(0.1);
    let mut sum = Point::zeros(d, 1);
    let mut drawn = 0usize;
    for n in [100usize, 1_000, 10_000, 100_000] {
        while drawn < n {
            sum += gaussian_estimate(&q, &x, &mut o, &mut rng).unwrap();
            drawn += 1;
        }
        let err = (&sum / n as f64 - &g).norm();
        let rms = ((d as f64 + 1.0) * g.norm_squared() / n as f64).sqrt();
        assert!(err <= 4.0 * rms, "n={n} err={err} rms={rms}");
    }
}

#[test]
fn gaussian_estimate_on_linear_function() {
    let g = dmatrix![1.0, -2.0; 0.5, 0.0; 3.0, 1.0];
    let p = Linear::new(g.clone());
    let x = dmatrix![0.1, 0.2; 0.3, 0.4; 0.5, 0.6];
    let e = dmatrix![0.2, 1.0; -1.0, 0.5; 0.0, 0.3];
    let est = gaussian_estimate_with(&p, &x, &mut oracle(0.3), &e, 0).unwrap();
    // <G, E> = 0.2 - 2 - 0.5 + 0 + 0 + 0.3 = -2
    assert_abs_diff_eq!(est, &e * -2.0, epsilon = 1e-12);
}

#[test]
fn zo_muon_on_linear_function_steps_along_orthogonalized_direction() {
    // the estimate is <G, E> E and NS is scale invariant, so the step is -gamma sign(<G, E>) NS(E)
    let g = dmatrix![1.0, -2.0; 0.5, 0.0; 3.0, 1.0];
    let p = Linear::new(g.clone());
    let x = Point::zeros(3, 2);
    let gamma = 0.01;
    let mut rng = substream(4, Purpose::Algorithm);
    let mut replay = rng.clone();
    let (x1, est) = step_zo_muon(&x, &p, &mut oracle(0.1), &mut rng, gamma, 5).unwrap();
    let e = gaussian_direction(p.shape(), &mut replay);
    let c = g.dot(&e);
    assert_abs_diff_eq!(est, &e * c, epsilon = 1e-10);
    let expected = -(newton_schulz(&e, 5).unwrap().q * (c.signum() * gamma));
    assert_abs_diff_eq!(x1, expected, epsilon = 1e-12);
}

#[test]
fn zo_sgd_on_linear_function() {
    let g = Point::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
    let p = Linear::new(g.clone());
    let x = Point::from_column_slice(3, 1, &[5.0, 5.0, 5.0]);
    let mut rng = substream(1, Purpose::Algorithm);
    let mut replay = rng.clone();
    let (x1, _) = step_zo_sgd(&x, &p, &mut oracle(0.2), &mut rng, 0.5).unwrap();
    let e = gaussian_direction(p.shape(), &mut replay);
    assert_abs_diff_eq!(x1, &x - &e * (0.5 * g.dot(&e)), epsilon = 1e-12);
}
