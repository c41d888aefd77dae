//! AltGDmin: truncated spectral initialization followed by alternating
//! exact least-squares updates of `B` and projected gradient steps on `U`.

mod config;
mod run;
mod steps;
mod trace;

pub use config::{SigmaMaxMode, SolverConfig, SIGMA_ESTIMATE_SHRINKAGE};
pub use run::{run_altgdmin, FactorEstimate};
pub use steps::{
    compute_alpha, gd_step, gradient, init_matrix, min_step, spectral_init, spectral_init_with_sigma,
    truncate,
};
pub use trace::{ConvergenceTrace, IterationRecord, TRACE_CSV_HEADER};

pub(crate) use run::{accumulate_gradient, drive, solve_columns, Backend, ProductCache};
pub(crate) use steps::{
    alpha_from_sum, column_init, column_least_squares, column_products, gradient_contribution,
};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::PhaseLabel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid {field}: {message}")]
    Config { field: &'static str, message: String },
    #[error("m must be ≥ r (got m = {m}, r = {r}); the least-squares step would be rank deficient")]
    Underdetermined { m: usize, r: usize },
    #[error("measurement set {0} is empty")]
    EmptyPhase(PhaseLabel),
    #[error("measurement set {0} is not available")]
    MissingPhase(PhaseLabel),
    #[error("least-squares system for column {column} is rank deficient")]
    RankDeficient { column: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<SolverError>,
    },
}

impl SolverError {
    /// Short stable name of the failure class, used in benchmark records.
    pub fn kind(&self) -> &'static str {
        match self {
            SolverError::Config { .. } => "Config",
            SolverError::Underdetermined { .. } | SolverError::RankDeficient { .. } => "RankDeficient",
            SolverError::Linalg(LinalgError::RankDeficient { .. }) => "RankDeficient",
            SolverError::Linalg(_) => "Linalg",
            SolverError::EmptyPhase(_) | SolverError::MissingPhase(_) => "Phase",
            SolverError::DimensionMismatch(_) => "DimensionMismatch",
            SolverError::AtIteration { source, .. } => source.kind(),
        }
    }

    /// True for errors caused by the caller's configuration rather than by
    /// the numerics of a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SolverError::Config { .. } | SolverError::Underdetermined { .. } | SolverError::DimensionMismatch(_)
        )
    }

    pub(crate) fn at(self, iter: usize) -> Self {
        match self {
            e @ SolverError::AtIteration { .. } => e,
            e if e.is_validation() => e,
            e => SolverError::AtIteration {
                iter,
                source: Box::new(e),
            },
        }
    }
}
