//! Dense matrix kernels: the cubic Newton–Schulz polar iteration, an exact
//! SVD-based polar factor used as its reference, norms and elementwise sign.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Point, Result};

/// Default number of Newton–Schulz iterations.
pub const DEFAULT_NS_STEPS: usize = 5;

/// Singular values below `RANK_TOLERANCE * sigma_max` are treated as zero by
/// [`polar_reference`].
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolarResult {
    /// Approximate polar factor `U V^T`, same shape as the input.
    pub q: DMatrix<f64>,
    pub iterations_used: usize,
    /// `||Q^T Q - I||_F` computed in the tall orientation.
    pub residual: f64,
}

fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("matrix has non-finite entries".into()))
    }
}

/// Cubic Newton–Schulz iteration `A <- 1.5 A - 0.5 A A^T A` started from
/// `A / ||A||_F`, run for exactly `steps` iterations.
///
/// Wide inputs are iterated in transposed form so the Gram product is always
/// the small `n x n` one; the result is transposed back.
pub fn newton_schulz(a: &DMatrix<f64>, steps: usize) -> Result<PolarResult> {
    check_finite(a)?;
    let norm = a.norm();
    if norm == 0.0 {
        return Err(Error::Domain(
            "Newton-Schulz is undefined for the zero matrix".into(),
        ));
    }
    let transposed = a.nrows() < a.ncols();
    let mut x = if transposed { a.transpose() } else { a.clone() };
    x /= norm;
    for _ in 0..steps {
        let gram = x.tr_mul(&x);
        x = &x * 1.5 - (&x * gram) * 0.5;
    }
    let n = x.ncols();
    let residual = (x.tr_mul(&x) - DMatrix::<f64>::identity(n, n)).norm();
    let q = if transposed { x.transpose() } else { x };
    Ok(PolarResult {
        q,
        iterations_used: steps,
        residual,
    })
}

/// Exact polar factor `U V^T` from a reduced SVD. Directions whose singular
/// value falls below [`RANK_TOLERANCE`] relative to the largest are dropped.
pub fn polar_reference(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(a)?;
    if a.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("polar factor of the zero matrix".into()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let s_max = svd.singular_values.max();
    let cutoff = RANK_TOLERANCE * s_max;
    let mut q = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > cutoff {
            q += u.column(k) * v_t.row(k);
        }
    }
    Ok(q)
}

pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.singular_values()
}

pub fn l1_norm(x: &Point) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn frobenius_norm(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Nuclear norm: the sum of singular values.
pub fn schatten1_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a).sum()
}

/// Entrywise sign with `sign(0) = 0`.
pub fn sign(x: &Point) -> Point {
    x.map(|v| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Frobenius inner product `tr(A^T B)`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    use super::*;

    #[test]
    fn ns_scalar_fixed_point() {
        let r = newton_schulz(&dmatrix![1.0], 5).unwrap();
        assert_eq!(r.q[(0, 0)], 1.0);
        assert_eq!(r.iterations_used, 5);
    }

    #[test]
    fn ns_zero_steps_only_normalizes() {
        let a = DMatrix::<f64>::identity(2, 2) * 2.0;
        let r = newton_schulz(&a, 0).unwrap();
        let expected = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(r.q, DMatrix::identity(2, 2) * expected, epsilon = 1e-15);
    }

    #[test]
    fn ns_diagonal_follows_scalar_recurrence() {
        // s <- 1.5 s - 0.5 s^3 applied 5 times to 1/sqrt(1.25) and 0.5/sqrt(1.25)
        let r = newton_schulz(&dmatrix![1.0, 0.0; 0.0, 0.5], 5).unwrap();
        assert_abs_diff_eq!(r.q[(0, 0)], 0.9999999999999999, epsilon = 1e-14);
        assert_abs_diff_eq!(r.q[(1, 1)], 0.9999834432292727, epsilon = 1e-14);
        assert_eq!(r.q[(0, 1)], 0.0);
        assert_eq!(r.q[(1, 0)], 0.0);
    }

    #[test]
    fn ns_rejects_zero_and_non_finite() {
        assert!(matches!(
            newton_schulz(&DMatrix::zeros(3, 2), 5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            newton_schulz(&dmatrix![1.0, f64::NAN], 5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            newton_schulz(&dmatrix![f64::INFINITY], 5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ns_wide_input_keeps_shape() {
        let a = dmatrix![1.0, 2.0, 0.5; -1.0, 0.3, 2.0];
        let r = newton_schulz(&a, 30).unwrap();
        assert_eq!(r.q.shape(), (2, 3));
        assert_abs_diff_eq!(r.q, polar_reference(&a).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn polar_of_orthogonal_is_itself() {
        let (s, c) = 0.3f64.sin_cos();
        let q = dmatrix![c, -s; s, c];
        assert_abs_diff_eq!(polar_reference(&q).unwrap(), q, epsilon = 1e-14);
    }

    #[test]
    fn polar_of_positive_diagonal_is_identity() {
        let p = polar_reference(&dmatrix![3.0, 0.0; 0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(p, DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn polar_drops_null_directions() {
        // rank one: u v^T with u = (1,1)/sqrt2, v = e1
        let p = polar_reference(&dmatrix![2.0, 0.0; 2.0, 0.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(p, dmatrix![h, 0.0; h, 0.0], epsilon = 1e-14);
        assert!(polar_reference(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(l1_norm(&DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 3.0])), 6.0);
        assert_abs_diff_eq!(frobenius_norm(&DMatrix::identity(3, 3)), 3f64.sqrt());
        assert_abs_diff_eq!(
            schatten1_norm(&dmatrix![2.0, 0.0; 0.0, 0.5]),
            2.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn sign_cases() {
        let v = DMatrix::from_column_slice(3, 1, &[1.5, -2.0, 0.0]);
        assert_eq!(sign(&v).as_slice(), &[1.0, -1.0, 0.0]);
        let neg = DMatrix::from_element(4, 1, -0.1);
        assert_eq!(sign(&neg), DMatrix::from_element(4, 1, -1.0));
        assert_eq!(sign(&DMatrix::zeros(3, 1)), DMatrix::zeros(3, 1));
    }
}
