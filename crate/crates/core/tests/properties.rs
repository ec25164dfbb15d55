use jaguar_core::diagnostics::{check_polar_inner_product, check_step_lemma};
use jaguar_core::estimators::{jaguar_update_at, JaguarState};
use jaguar_core::linalg::{newton_schulz, polar_reference};
use jaguar_core::optimizers::{run, Optimizer, OptimizerConfig, OptimizerKind};
use jaguar_core::oracle::{Direction, NoiseKind, Oracle, OracleConfig};
use jaguar_core::problems::{
    exact_gradient, gradient_variance, Logistic, MatrixRegression, Problem, Quadratic,
};
use jaguar_core::rng::{substream, Purpose};
use jaguar_core::Point;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(seed: u64, rows: usize, cols: usize, scale: f64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Point::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

fn noiseless(tau: f64) -> Oracle {
    Oracle::new(OracleConfig::noiseless(tau), substream(0, Purpose::OracleNoise)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signsgd_moves_every_coordinate_by_gamma_or_zero(
        d in 1usize..12, seed in any::<u64>(), gamma in 1e-4f64..0.5, beta in 0.0f64..1.0,
    ) {
        let q = Quadratic::new(d, 8.0, 0.5, 4, 1.0, seed).unwrap();
        let mut opt = Optimizer::new(
            OptimizerKind::JaguarSignSgd, &q, &OptimizerConfig::new(gamma, beta, 1e-2, 10, seed),
        ).unwrap();
        for _ in 0..10 {
            let before = opt.point().clone();
            opt.step(&q).unwrap();
            for (a, b) in before.iter().zip(opt.point().iter()) {
                let moved = (a - b).abs();
                prop_assert!(moved == 0.0 || (moved - gamma).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn jaguar_refresh_touches_one_entry(
        rows in 1usize..6, cols in 1usize..6, seed in any::<u64>(), beta in 0.0f64..=1.0,
    ) {
        let p = MatrixRegression::new(rows.max(cols), cols.min(rows), 1, 0.3, 3, seed).unwrap();
        let shape = p.shape();
        let x = random_point(seed, shape.rows(), shape.cols(), 2.0);
        let m = random_point(seed ^ 1, shape.rows(), shape.cols(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coord = (rng.random_range(0..shape.rows()), rng.random_range(0..shape.cols()));
        let state = JaguarState::with_momentum(m.clone(), beta).unwrap();
        let next = jaguar_update_at(state, &p, &x, &mut noiseless(0.01), coord, 1).unwrap();
        for i in 0..shape.rows() {
            for j in 0..shape.cols() {
                if (i, j) != coord {
                    prop_assert_eq!(next.momentum()[(i, j)].to_bits(), m[(i, j)].to_bits());
                }
            }
        }
    }

    #[test]
    fn oracle_noise_stays_within_delta(
        seed in any::<u64>(), delta in 1e-8f64..1.0, rounding in any::<bool>(),
    ) {
        let q = Quadratic::new(4, 3.0, 0.5, 5, 1.0, seed).unwrap();
        let noise = if rounding { NoiseKind::Rounding } else { NoiseKind::UniformBounded };
        let mut o = Oracle::new(
            OracleConfig { tau: 0.1, delta, noise }, substream(seed, Purpose::OracleNoise),
        ).unwrap();
        for k in 0..20 {
            let x = random_point(seed.wrapping_add(k), 4, 1, 3.0);
            let sample = (k as usize) % 5;
            let v = o.evaluate(&q, &x, sample).unwrap();
            prop_assert!((v - q.sample_value(&x, sample)).abs() <= delta * (1.0 + 1e-12));
        }
    }

    #[test]
    fn central_difference_is_exact_on_quadratics(
        d in 1usize..10, seed in any::<u64>(), tau in 1e-3f64..1.0,
    ) {
        let q = Quadratic::new(d, 10.0, 1.0, 3, 2.0, seed).unwrap();
        let x = random_point(seed, d, 1, 2.0);
        let e = random_point(seed ^ 7, d, 1, 1.0);
        let diff = noiseless(tau).two_point_diff(&q, &x, Direction::Dense(&e), 2).unwrap();
        let exact = q.sample_gradient(&x, 2).dot(&e);
        prop_assert!((diff - exact).abs() <= 1e-9 * (1.0 + exact.abs()), "{} vs {}", diff, exact);
    }

    #[test]
    fn smoothness_and_variance_certificates(seed in any::<u64>(), which in 0usize..3) {
        let p: Box<dyn Problem> = match which {
            0 => Box::new(Quadratic::new(5, 20.0, 0.8, 6, 3.0, seed).unwrap()),
            1 => Box::new(Logistic::new(5, 30, 0.1, seed).unwrap()),
            _ => Box::new(MatrixRegression::new(4, 3, 2, 0.5, 5, seed).unwrap()),
        };
        let shape = p.shape();
        let x = random_point(seed, shape.rows(), shape.cols(), 2.0);
        let y = random_point(seed ^ 3, shape.rows(), shape.cols(), 2.0);
        let dist = (&x - &y).norm();
        let gx = exact_gradient(p.as_ref(), &x).unwrap();
        let gy = exact_gradient(p.as_ref(), &y).unwrap();
        prop_assert!((&gx - &gy).norm() <= p.smoothness() * dist * (1.0 + 1e-9));
        for k in 0..p.sample_count() {
            let gk = p.sample_gradient(&x, k) - p.sample_gradient(&y, k);
            prop_assert!(gk.norm() <= p.sample_smoothness(k) * dist * (1.0 + 1e-9) + 1e-12);
        }
        let var = gradient_variance(p.as_ref(), &x).unwrap();
        prop_assert!(var <= p.sigma().powi(2) * (1.0 + 1e-9) + 1e-12, "{} > {}", var, p.sigma());
    }

    #[test]
    fn polar_inner_product_inequality(
        rows in 1usize..9, cols in 1usize..6, seed in any::<u64>(),
    ) {
        let a = random_point(seed, rows, cols, 1.0);
        let b = random_point(seed ^ 11, rows, cols, 1.0);
        prop_assert!(check_polar_inner_product(&a, &b).unwrap().passed);
        prop_assert!(check_polar_inner_product(&a, &(-&a)).unwrap().passed);
    }

    #[test]
    fn step_lemma_inequality(
        rows in 1usize..9, cols in 1usize..6, seed in any::<u64>(), gamma in 1e-4f64..1.0,
    ) {
        let p = MatrixRegression::new(rows, cols, 1, 0.5, 4, seed).unwrap();
        let x = random_point(seed, rows, cols, 2.0);
        let m = random_point(seed ^ 5, rows, cols, 2.0);
        prop_assert!(check_step_lemma(&x, &m, &p, gamma).unwrap().passed);
    }

    #[test]
    fn newton_schulz_converges_to_polar_factor(
        rows in 1usize..9, cols in 1usize..9, seed in any::<u64>(),
    ) {
        let a = random_point(seed, rows, cols, 1.0);
        let n = rows.min(cols);
        let sv = a.clone().svd(false, false).singular_values;
        prop_assume!(sv[n - 1] > 1e-2 * sv[0]);
        let ns = newton_schulz(&a, 60).unwrap();
        prop_assert!((ns.q - polar_reference(&a).unwrap()).norm() < 1e-8);
        prop_assert!(ns.residual < 1e-8);
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), kind in 0usize..3) {
        let kind = [OptimizerKind::JaguarSignSgd, OptimizerKind::ZoSgd, OptimizerKind::ZoSignSgd][kind];
        let q = Quadratic::new(3, 2.0, 0.5, 4, 1.0, seed).unwrap();
        let mut cfg = OptimizerConfig::new(0.01, 0.9, 1e-2, 20, seed);
        cfg.delta = 1e-5;
        cfg.noise = NoiseKind::UniformBounded;
        let a = run(kind, &q, &cfg).unwrap();
        let b = run(kind, &q, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
