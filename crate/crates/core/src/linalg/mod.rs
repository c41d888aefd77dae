//! Dense real-matrix primitives: QR orthonormalization, top-r SVD,
//! least squares, subspace distances and exactly rounded summation.
//!
//! All matrices are `nalgebra::DMatrix<f64>`, stored column-major. Every
//! routine is a pure, single-threaded function of its inputs, so repeated
//! calls on identical data return bit-identical results.

mod distance;
mod lstsq;
mod qr;
mod sum;
mod svd;

pub use distance::{subspace_distance_2, subspace_distance_f};
pub use lstsq::{least_squares, least_squares_with_tol};
pub use qr::qr_orthonormalize;
pub use sum::{ExactMatrixSum, ExactSum};
pub use svd::{singular_values, top_r_left_singular_vectors, top_r_with_leading_value};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Dense column-major real matrix.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Maximum entry deviation of `QᵀQ` from the identity accepted for an
/// orthonormal basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Relative reconstruction tolerance of a QR factorization.
pub const QR_RECONSTRUCTION_TOL: f64 = 1e-10;
/// Relative residual-orthogonality tolerance of a least-squares solve.
pub const LSTSQ_RESIDUAL_TOL: f64 = 1e-8;
/// Numerical rank threshold: a triangular factor whose smallest diagonal
/// magnitude falls below this fraction of its largest is rank deficient.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is numerically rank deficient (pivot ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("requested rank {requested} exceeds the maximum {max}")]
    RankTooLarge { requested: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SVD iteration did not converge")]
    ConvergenceFailure,
    #[error("columns are not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("matrix must have at least as many rows as columns ({rows}x{cols})")]
    WideMatrix { rows: usize, cols: usize },
}

/// An `n x r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis(Matrix);

impl OrthonormalBasis {
    /// Wraps `m` after checking `‖mᵀm − I‖_max ≤ ORTHONORMAL_TOL`.
    pub fn new(m: Matrix) -> Result<Self, LinalgError> {
        if m.ncols() > m.nrows() {
            return Err(LinalgError::WideMatrix {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let deviation = orthonormality_deviation(&m);
        if !(deviation <= ORTHONORMAL_TOL) {
            return Err(LinalgError::NotOrthonormal { deviation });
        }
        Ok(Self(m))
    }

    /// The first `r` columns of the `n x n` identity.
    pub fn canonical(n: usize, r: usize) -> Self {
        assert!(r <= n, "rank {r} exceeds dimension {n}");
        Self(Matrix::identity(n, r))
    }

    pub(crate) fn from_trusted(m: Matrix) -> Self {
        debug_assert!(orthonormality_deviation(&m) <= ORTHONORMAL_TOL);
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Number of basis vectors `r`.
    pub fn rank(&self) -> usize {
        self.0.ncols()
    }
}

/// `‖mᵀm − I‖_max`.
pub fn orthonormality_deviation(m: &Matrix) -> f64 {
    let gram = m.tr_mul(m);
    let mut worst = 0.0_f64;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = (gram[(i, j)] - target).abs();
            if d.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(d);
        }
    }
    worst
}

/// Largest singular value of `m` (0 for an empty matrix).
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest of the `min(rows, cols)` singular values of `m`.
pub fn smallest_singular_value(m: &Matrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}
