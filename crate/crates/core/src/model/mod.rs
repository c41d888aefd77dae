//! Planted low-rank instances and their Gaussian column sketches.

mod container;
mod seed;
mod sketch;
mod truth;

pub use container::{
    read_factors, read_ground_truth, read_sketch_set, write_factors, write_ground_truth,
    write_sketch_set, ContainerKind, MAGIC,
};
pub use seed::{SeedSpec, StreamLabel};
pub use sketch::{sketch, sketch_noisy, sketch_phase, ColumnSketch, Phase, PhaseLabel, SketchSet, SplitMode};
pub use truth::{gaussian_matrix, generate_ground_truth, GroundTruth, GroundTruthSummary};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("rank r = {r} must satisfy 1 ≤ r ≤ min(n, q) = {max}")]
    BadRank { r: usize, max: usize },
    #[error("condition number {0} must be finite and ≥ 1 (and exactly 1 when r = 1)")]
    BadKappa(f64),
    #[error("measurements per column m must be ≥ 1")]
    NoMeasurements,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed container: {0}")]
    Format(String),
}
