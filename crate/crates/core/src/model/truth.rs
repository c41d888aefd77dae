use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ModelError, SeedSpec, StreamLabel};
use crate::linalg::{qr_orthonormalize, singular_values, Matrix, OrthonormalBasis};

/// A planted rank-`r` matrix `X⋆ = U⋆ Σ⋆ V⋆ = U⋆ B⋆` with its measured
/// condition number and right incoherence.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub u_star: OrthonormalBasis,
    /// Non-increasing.
    pub sigma_star: Vec<f64>,
    /// `r x q`, equal to `Σ⋆ V⋆`.
    pub b_star: Matrix,
    /// `n x q`, equal to `U⋆ B⋆`.
    pub x_star: Matrix,
    pub kappa: f64,
    /// Smallest `μ` with `‖b⋆_k‖² ≤ μ² r σ⋆_max² / q` for every column.
    pub mu: f64,
    pub seed: u64,
}

/// The JSON summary of a [`GroundTruth`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSummary {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub kappa: f64,
    pub mu: f64,
    pub seed: u64,
}

/// `rows x cols` i.i.d. standard normal entries, drawn in row-major order.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(rng.sample::<f64, _>(StandardNormal));
    }
    Matrix::from_row_slice(rows, cols, &data)
}

/// Draws `U⋆` and `V⋆` Haar-uniformly (Gaussian matrices through the
/// sign-normalized QR) and places the singular values on a geometric
/// ladder from `kappa_target` down to 1.
pub fn generate_ground_truth(
    n: usize,
    q: usize,
    r: usize,
    kappa_target: f64,
    seed: &SeedSpec,
) -> Result<GroundTruth, ModelError> {
    let max = n.min(q);
    if r == 0 || r > max {
        return Err(ModelError::BadRank { r, max });
    }
    if !(kappa_target.is_finite() && kappa_target >= 1.0) || (r == 1 && kappa_target != 1.0) {
        return Err(ModelError::BadKappa(kappa_target));
    }

    let u_star = qr_orthonormalize(&gaussian_matrix(n, r, &mut seed.stream(StreamLabel::TruthBasis, 0)))?.0;
    let v_cols = qr_orthonormalize(&gaussian_matrix(q, r, &mut seed.stream(StreamLabel::TruthRows, 0)))?.0;

    let sigma_star: Vec<f64> = if r == 1 {
        vec![1.0]
    } else {
        (0..r)
            .map(|i| kappa_target.powf((r - 1 - i) as f64 / (r - 1) as f64))
            .collect()
    };

    let mut b_star = v_cols.matrix().transpose();
    for (i, s) in sigma_star.iter().enumerate() {
        b_star.row_mut(i).scale_mut(*s);
    }
    let x_star = u_star.matrix() * &b_star;
    let kappa = sigma_star[0] / sigma_star[r - 1];
    let mu = incoherence(&b_star, sigma_star[0]);

    Ok(GroundTruth {
        n,
        q,
        r,
        u_star,
        sigma_star,
        b_star,
        x_star,
        kappa,
        mu,
        seed: seed.master_seed,
    })
}

/// `sqrt(q · max_k ‖b_k‖² / (r σ_max²))`.
pub(crate) fn incoherence(b: &Matrix, sigma_max: f64) -> f64 {
    let (r, q) = b.shape();
    if sigma_max == 0.0 || r == 0 {
        return 0.0;
    }
    let max_sq = b.column_iter().map(|c| c.norm_squared()).fold(0.0_f64, f64::max);
    (q as f64 * max_sq / (r as f64 * sigma_max * sigma_max)).sqrt()
}

impl GroundTruth {
    /// Builds a planted instance from an explicit basis and coefficient
    /// matrix; `Σ⋆` is read off the singular values of `b_star`.
    pub fn from_parts(u_star: OrthonormalBasis, b_star: Matrix, seed: u64) -> Result<Self, ModelError> {
        let (n, r) = (u_star.dim(), u_star.rank());
        if b_star.nrows() != r {
            return Err(ModelError::DimensionMismatch(format!(
                "basis has rank {r} but coefficients have {} rows",
                b_star.nrows()
            )));
        }
        let q = b_star.ncols();
        if r == 0 || r > n.min(q) {
            return Err(ModelError::BadRank { r, max: n.min(q) });
        }
        let sigma_star = singular_values(&b_star);
        let smallest = sigma_star[r - 1];
        if !(smallest > 0.0) {
            return Err(ModelError::BadKappa(f64::INFINITY));
        }
        let x_star = u_star.matrix() * &b_star;
        let kappa = sigma_star[0] / smallest;
        let mu = incoherence(&b_star, sigma_star[0]);
        Ok(Self {
            n,
            q,
            r,
            u_star,
            sigma_star,
            b_star,
            x_star,
            kappa,
            mu,
            seed,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_star[0]
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_star[self.r - 1]
    }

    /// Default truncation constant `9 κ² μ²`.
    pub fn default_c_tilde(&self) -> f64 {
        9.0 * self.kappa * self.kappa * self.mu * self.mu
    }

    pub fn summary(&self) -> GroundTruthSummary {
        GroundTruthSummary {
            n: self.n,
            q: self.q,
            r: self.r,
            kappa: self.kappa,
            mu: self.mu,
            seed: self.seed,
        }
    }
}
