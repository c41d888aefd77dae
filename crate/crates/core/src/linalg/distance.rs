use super::{LinalgError, Matrix, OrthonormalBasis};

fn projected_complement(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<Matrix, LinalgError> {
    if u1.dim() != u2.dim() || u1.rank() != u2.rank() {
        return Err(LinalgError::DimensionMismatch(format!(
            "bases are {}x{} and {}x{}",
            u1.dim(),
            u1.rank(),
            u2.dim(),
            u2.rank()
        )));
    }
    let a = u1.matrix();
    let b = u2.matrix();
    // (I − U₁U₁ᵀ)U₂ without forming the n x n projector
    let overlap = a.tr_mul(b);
    Ok(b - a * overlap)
}

/// `SE₂(U₁, U₂) = ‖(I − U₁U₁ᵀ)U₂‖₂`, the sine of the largest principal angle.
pub fn subspace_distance_2(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<f64, LinalgError> {
    let p = projected_complement(u1, u2)?;
    Ok(super::spectral_norm(&p))
}

/// `SE_F(U₁, U₂) = ‖(I − U₁U₁ᵀ)U₂‖_F`.
pub fn subspace_distance_f(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<f64, LinalgError> {
    let p = projected_complement(u1, u2)?;
    Ok(p.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qr_orthonormalize;
    use proptest::prelude::*;

    fn vec_basis(v: &[f64]) -> OrthonormalBasis {
        OrthonormalBasis::new(Matrix::from_column_slice(v.len(), 1, v)).unwrap()
    }

    #[test]
    fn identical_subspaces() {
        let u = OrthonormalBasis::canonical(5, 2);
        assert_eq!(subspace_distance_2(&u, &u).unwrap(), 0.0);
        assert_eq!(subspace_distance_f(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_lines() {
        let e1 = vec_basis(&[1.0, 0.0]);
        let e2 = vec_basis(&[0.0, 1.0]);
        assert_eq!(subspace_distance_2(&e1, &e2).unwrap(), 1.0);
        assert_eq!(subspace_distance_f(&e1, &e2).unwrap(), 1.0);
    }

    #[test]
    fn rotated_line() {
        let theta = 0.3_f64;
        let e1 = vec_basis(&[1.0, 0.0]);
        let rot = vec_basis(&[theta.cos(), theta.sin()]);
        let d = subspace_distance_2(&e1, &rot).unwrap();
        assert!((d - 0.295_520_206_661_339_6).abs() <= 1e-15);
    }

    #[test]
    fn mismatched_shapes() {
        let a = OrthonormalBasis::canonical(4, 2);
        let b = OrthonormalBasis::canonical(4, 1);
        assert!(matches!(
            subspace_distance_2(&a, &b),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    fn basis_from(vals: &[f64], n: usize, r: usize) -> OrthonormalBasis {
        let m = Matrix::from_fn(n, r, |i, j| vals[(i * r + j) % vals.len()] + if i == j { 0.5 } else { 0.0 });
        qr_orthonormalize(&m).unwrap().0
    }

    proptest! {
        #[test]
        fn distance_bounds_and_symmetry(
            a in proptest::collection::vec(-1.0f64..1.0, 40),
            b in proptest::collection::vec(-1.0f64..1.0, 40),
            r in 1usize..4,
        ) {
            let n = 8;
            let u1 = basis_from(&a, n, r);
            let u2 = basis_from(&b, n, r);
            let d2 = subspace_distance_2(&u1, &u2).unwrap();
            let df = subspace_distance_f(&u1, &u2).unwrap();
            let d2_swapped = subspace_distance_2(&u2, &u1).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d2));
            prop_assert!(df <= (r as f64).sqrt() * d2 + 1e-12);
            prop_assert!((d2 - d2_swapped).abs() <= 1e-10);
        }
    }
}
