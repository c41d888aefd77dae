use super::{LinalgError, Matrix, OrthonormalBasis};

const SVD_MAX_SWEEPS: usize = 10_000;

/// Singular values of `m` in non-increasing order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis of the top-`r` left singular subspace of `m`.
pub fn top_r_left_singular_vectors(m: &Matrix, r: usize) -> Result<OrthonormalBasis, LinalgError> {
    top_r_with_leading_value(m, r).map(|(u, _)| u)
}

/// Same as [`top_r_left_singular_vectors`] but also returns `σ₁(m)`.
///
/// Uses a full thin SVD and slices the leading `r` vectors; ties are broken
/// by the original column index so the output is deterministic.
pub fn top_r_with_leading_value(
    m: &Matrix,
    r: usize,
) -> Result<(OrthonormalBasis, f64), LinalgError> {
    let (rows, cols) = m.shape();
    let max = rows.min(cols);
    if r > max {
        return Err(LinalgError::RankTooLarge { requested: r, max });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::ConvergenceFailure);
    }
    if r == 0 {
        return Ok((OrthonormalBasis::from_trusted(Matrix::zeros(rows, 0)), 0.0));
    }

    let svd = m
        .clone()
        .try_svd(true, false, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or(LinalgError::ConvergenceFailure)?;
    let u = svd.u.ok_or(LinalgError::ConvergenceFailure)?;
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let mut basis = Matrix::zeros(rows, r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    let leading = sigma[order[0]];
    OrthonormalBasis::new(basis).map(|b| (b, leading))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{subspace_distance_2, Vector};

    #[test]
    fn diagonal_matrix_picks_leading_axes() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0, 1.0]));
        let u = top_r_left_singular_vectors(&m, 2).unwrap();
        let target = OrthonormalBasis::canonical(3, 2);
        assert!(subspace_distance_2(&u, &target).unwrap() <= 1e-12);
    }

    #[test]
    fn unsorted_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 5.0, 2.0]));
        let (u, s1) = top_r_with_leading_value(&m, 1).unwrap();
        assert!((s1 - 5.0).abs() < 1e-14);
        assert!((u.matrix()[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_factor() {
        let u = Vector::from_vec(vec![1.0, 2.0, -2.0]) / 3.0;
        let v = Vector::from_vec(vec![0.5, -1.0, 4.0, 2.0]);
        let m = &u * v.transpose();
        let basis = top_r_left_singular_vectors(&m, 1).unwrap();
        let target = OrthonormalBasis::new(Matrix::from_column_slice(3, 1, u.as_slice())).unwrap();
        assert!(subspace_distance_2(&basis, &target).unwrap() <= 1e-12);
    }

    #[test]
    fn rank_too_large() {
        let m = Matrix::zeros(4, 3);
        assert_eq!(
            top_r_left_singular_vectors(&m, 4).unwrap_err(),
            LinalgError::RankTooLarge { requested: 4, max: 3 }
        );
    }

    #[test]
    fn singular_values_sorted() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 7.0, 0.0]);
        let s = singular_values(&m);
        assert!((s[0] - 7.0).abs() < 1e-14 && (s[1] - 1.0).abs() < 1e-14);
    }
}
