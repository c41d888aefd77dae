use super::{LinalgError, Matrix, Vector, RANK_TOL};

/// `argmin_b ‖y − a·b‖₂` for a tall full-column-rank `a`, solved through a
/// Householder QR of `a` (never the normal equations).
pub fn least_squares(a: &Matrix, y: &Vector) -> Result<Vector, LinalgError> {
    least_squares_with_tol(a, y, RANK_TOL)
}

/// [`least_squares`] with an explicit relative pivot threshold.
pub fn least_squares_with_tol(a: &Matrix, y: &Vector, rank_tol: f64) -> Result<Vector, LinalgError> {
    let (rows, cols) = a.shape();
    if y.len() != rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "system has {rows} rows but right-hand side has {}",
            y.len()
        )));
    }
    if cols > rows {
        return Err(LinalgError::RankDeficient { ratio: 0.0 });
    }
    if cols == 0 {
        return Ok(Vector::zeros(0));
    }

    let qr = a.clone().qr();
    let r = qr.r();
    let (lo, hi) = r
        .diagonal()
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    if !(hi > 0.0) || !(lo > rank_tol * hi) {
        let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        return Err(LinalgError::RankDeficient { ratio });
    }

    let mut rhs = y.clone();
    qr.q_tr_mul(&mut rhs);
    let head = rhs.rows(0, cols).into_owned();
    r.solve_upper_triangular(&head)
        .ok_or(LinalgError::RankDeficient { ratio: lo / hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LSTSQ_RESIDUAL_TOL;
    use proptest::prelude::*;

    #[test]
    fn identity_system() {
        let y = Vector::from_vec(vec![1.5, -2.0, 0.25]);
        let b = least_squares(&Matrix::identity(3, 3), &y).unwrap();
        assert!((b - y).amax() <= 1e-15);
    }

    #[test]
    fn orthonormal_columns_project() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = Matrix::from_row_slice(3, 2, &[s, 0.0, s, 0.0, 0.0, 1.0]);
        let y = Vector::from_vec(vec![1.0, 3.0, -2.0]);
        let b = least_squares(&a, &y).unwrap();
        let expected = a.tr_mul(&y);
        assert!((b - expected).amax() <= 1e-14);
    }

    #[test]
    fn averaging_column() {
        let a = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let y = Vector::from_vec(vec![1.0, 3.0]);
        let b = least_squares(&a, &y).unwrap();
        assert!((b[0] - 2.0).abs() <= 1e-15);
    }

    #[test]
    fn deficient_system() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(least_squares(&a, &y), Err(LinalgError::RankDeficient { .. })));
        let wide = Matrix::zeros(1, 2);
        assert!(matches!(
            least_squares(&wide, &Vector::zeros(1)),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn rhs_length_checked() {
        let err = least_squares(&Matrix::identity(3, 2), &Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch(_)));
    }

    proptest! {
        #[test]
        fn residual_is_orthogonal(
            vals in proptest::collection::vec(-1.0f64..1.0, 64),
            rhs in proptest::collection::vec(-5.0f64..5.0, 16),
        ) {
            let (m, r) = (16, 3);
            let a = Matrix::from_fn(m, r, |i, j| vals[(i * r + j) % vals.len()] + if i == j { 2.0 } else { 0.0 });
            let y = Vector::from_column_slice(&rhs);
            let b = least_squares(&a, &y).unwrap();
            let resid = &y - &a * &b;
            let ortho = a.tr_mul(&resid);
            let scale = a.norm() * y.norm();
            prop_assert!(ortho.amax() <= LSTSQ_RESIDUAL_TOL * scale);
        }
    }
}
