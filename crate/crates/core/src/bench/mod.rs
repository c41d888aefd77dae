//! Monte-Carlo harness: parameter sweeps over planted instances, and
//! oracle suites that check the gradient, the min-step bounds and the
//! initialization statistics empirically.

mod gradient;
mod grid;
mod lemma;
mod quadrature;
mod stats;

pub use gradient::{
    gradient_oracle_suite, half_squared_residual, GradientCase, GradientCaseSpec, GradientReport, GradientSuiteParams,
};
pub use grid::{
    run_cell, run_grid, trial_instance, trial_seeds, Cell, CellResult, ExperimentGrid, FederationTemplate,
    SigmaChoice, SolverTemplate, TrialResult, CELLS_CSV_HEADER, CONTRACTION_SLACK, MAX_SKETCH_ELEMENTS,
};
pub use lemma::{
    lemma_event_suite, BetaReport, EventFrequency, InitCheckParams, InitExpectationCase, LemmaReport, LemmaSuiteParams,
};
pub use quadrature::{beta, truncated_second_moment};
pub use stats::{
    contraction_bound, contraction_ratios, contraction_regime_upper, log_linear_r2, median, CONTRACTION_REGIME_LOWER,
};

use thiserror::Error;

use crate::linalg::{qr_orthonormalize, LinalgError, OrthonormalBasis};
use crate::model::{gaussian_matrix, SeedSpec, StreamLabel};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid grid field {field}: {message}")]
    InvalidGrid { field: &'static str, message: String },
    #[error("grid file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `U⋆ cos θ + W sin θ` with `sin θ = delta` and `W` a random orthonormal
/// basis orthogonal to `U⋆`; every principal angle to `U⋆` equals `θ`, so
/// `SE₂(U, U⋆) = delta`. Needs `n ≥ 2r` and `0 ≤ delta ≤ 1`.
pub fn perturbed_basis(u_star: &OrthonormalBasis, delta: f64, seed: &SeedSpec) -> Result<OrthonormalBasis, LinalgError> {
    let (n, r) = (u_star.dim(), u_star.rank());
    if n < 2 * r {
        return Err(LinalgError::DimensionMismatch(format!(
            "no room for an orthogonal perturbation of rank {r} in dimension {n}"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(LinalgError::DimensionMismatch(format!("delta = {delta} is not in [0, 1]")));
    }
    let us = u_star.matrix();
    let g = gaussian_matrix(n, r, &mut seed.stream(StreamLabel::Auxiliary, 0));
    let (w, _) = qr_orthonormalize(&(&g - us * us.tr_mul(&g)))?;
    let cos = (1.0 - delta * delta).sqrt();
    OrthonormalBasis::new(us * cos + w.matrix() * delta)
}
