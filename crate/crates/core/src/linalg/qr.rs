use super::{orthonormality_deviation, LinalgError, Matrix, OrthonormalBasis, RANK_TOL};

/// Thin Householder QR of a tall matrix with the sign convention
/// `R_jj ≥ 0`, which makes the factorization unique for full-rank input.
///
/// Returns `(Q, R)` with `Q` (`rows x cols`) orthonormal and `R`
/// (`cols x cols`) upper triangular.
pub fn qr_orthonormalize(m: &Matrix) -> Result<(OrthonormalBasis, Matrix), LinalgError> {
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(LinalgError::WideMatrix { rows, cols });
    }
    if cols == 0 {
        return Ok((OrthonormalBasis::from_trusted(Matrix::zeros(rows, 0)), Matrix::zeros(0, 0)));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::RankDeficient { ratio: f64::NAN });
    }

    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();

    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }

    let (lo, hi) = r
        .diagonal()
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    if !(hi > 0.0) || lo <= RANK_TOL * hi {
        let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        return Err(LinalgError::RankDeficient { ratio });
    }
    debug_assert!(orthonormality_deviation(&q) <= super::ORTHONORMAL_TOL);
    Ok((OrthonormalBasis::from_trusted(q), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{QR_RECONSTRUCTION_TOL, ORTHONORMAL_TOL};
    use proptest::prelude::*;

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn identity_factors_trivially() {
        let i3 = Matrix::identity(3, 3);
        let (q, r) = qr_orthonormalize(&i3).unwrap();
        assert!(max_abs_diff(q.matrix(), &i3) <= 1e-15);
        assert!(max_abs_diff(&r, &i3) <= 1e-15);
    }

    #[test]
    fn scaled_axes() {
        let m = Matrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let (q, r) = qr_orthonormalize(&m).unwrap();
        let q_expected = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let r_expected = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!(max_abs_diff(q.matrix(), &q_expected) <= 1e-14);
        assert!(max_abs_diff(&r, &r_expected) <= 1e-14);
    }

    #[test]
    fn orthonormal_input_returns_itself() {
        let c = 0.6_f64;
        let s = 0.8_f64;
        let m = Matrix::from_row_slice(3, 2, &[c, 0.0, s, 0.0, 0.0, 1.0]);
        let (q, r) = qr_orthonormalize(&m).unwrap();
        assert!(max_abs_diff(q.matrix(), &m) <= 1e-15);
        assert!(max_abs_diff(&r, &Matrix::identity(2, 2)) <= 1e-15);
    }

    #[test]
    fn negative_diagonal_is_flipped() {
        let m = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let (q, r) = qr_orthonormalize(&m).unwrap();
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
        assert!(max_abs_diff(&(q.matrix() * &r), &m) <= 1e-15);
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            qr_orthonormalize(&m),
            Err(LinalgError::RankDeficient { .. })
        ));
        assert!(matches!(
            qr_orthonormalize(&Matrix::zeros(4, 2)),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn wide_input_is_rejected() {
        assert!(matches!(
            qr_orthonormalize(&Matrix::zeros(2, 3)),
            Err(LinalgError::WideMatrix { .. })
        ));
    }

    proptest! {
        #[test]
        fn factorization_invariants(
            rows in 1usize..12,
            extra in 0usize..6,
            seed in proptest::collection::vec(-1.0f64..1.0, 200),
        ) {
            let cols = rows.min(1 + extra);
            let m = Matrix::from_fn(rows, cols, |i, j| seed[(i * 13 + j * 7) % seed.len()] + if i == j { 3.0 } else { 0.0 });
            let (q, r) = qr_orthonormalize(&m).unwrap();
            prop_assert!(orthonormality_deviation(q.matrix()) <= ORTHONORMAL_TOL);
            let rel = (q.matrix() * &r - &m).norm() / m.norm();
            prop_assert!(rel <= QR_RECONSTRUCTION_TOL);
            for j in 0..cols {
                prop_assert!(r[(j, j)] >= 0.0);
                for i in (j + 1)..cols {
                    prop_assert_eq!(r[(i, j)], 0.0);
                }
            }
        }
    }
}
