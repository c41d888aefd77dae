use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::model::{GroundTruth, SketchSet, SplitMode};

/// Lower bound on the shrinkage of the leading singular value of the
/// truncated initialization matrix relative to `σ⋆_max`; dividing by it
/// gives a conservative `σ̂_max`.
pub const SIGMA_ESTIMATE_SHRINKAGE: f64 = 0.92;

/// Source of the `σ̂_max` used in the step size `c_η / (m σ̂_max²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaMaxMode {
    /// A known value, typically `σ⋆_max` of the planted instance.
    Oracle(f64),
    /// `σ₁(X̂₀) / 0.92`.
    EstimateFromInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: usize,
    /// Iteration budget `T`.
    pub iterations: usize,
    /// Step-size constant, `0 < c_η ≤ 0.5`.
    pub c_eta: f64,
    /// Truncation constant; `None` means `9 κ² μ²` of the supplied ground truth.
    pub c_tilde: Option<f64>,
    pub sigma_max_mode: SigmaMaxMode,
    /// Expect `2T + 2` disjoint measurement sets instead of one shared set.
    pub split: bool,
    /// Stop once `SE₂(U_t, U_{t−1})` falls below this.
    pub stop_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(rank: usize, iterations: usize) -> Self {
        Self {
            rank,
            iterations,
            c_eta: 0.4,
            c_tilde: None,
            sigma_max_mode: SigmaMaxMode::EstimateFromInit,
            split: false,
            stop_tol: None,
        }
    }

    /// Uses the planted `σ⋆_max` in the step size.
    pub fn with_oracle_sigma(mut self, gt: &GroundTruth) -> Self {
        self.sigma_max_mode = SigmaMaxMode::Oracle(gt.sigma_max());
        self
    }

    fn invalid(field: &'static str, message: impl Into<String>) -> SolverError {
        SolverError::Config {
            field,
            message: message.into(),
        }
    }

    /// Checks the configuration on its own.
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.rank == 0 {
            return Err(Self::invalid("r", "rank must be ≥ 1"));
        }
        if self.iterations == 0 {
            return Err(Self::invalid("t_iters", "iteration budget must be ≥ 1"));
        }
        if !(self.c_eta > 0.0 && self.c_eta <= 0.5) {
            return Err(Self::invalid("c_eta", format!("must lie in (0, 0.5], got {}", self.c_eta)));
        }
        if let Some(c) = self.c_tilde {
            if !(c.is_finite() && c > 0.0) {
                return Err(Self::invalid("c_tilde", format!("must be positive and finite, got {c}")));
            }
        }
        if let SigmaMaxMode::Oracle(s) = self.sigma_max_mode {
            if !(s.is_finite() && s > 0.0) {
                return Err(Self::invalid("sigma_max", format!("oracle value must be positive, got {s}")));
            }
        }
        if let Some(tol) = self.stop_tol {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(Self::invalid("stop_tol", format!("must be non-negative, got {tol}")));
            }
        }
        Ok(())
    }

    /// Checks the configuration against the measurements and, when given,
    /// the planted instance.
    pub fn validate_for(&self, sketches: &SketchSet, gt: Option<&GroundTruth>) -> Result<(), SolverError> {
        self.validate()?;
        if sketches.m < self.rank {
            return Err(SolverError::Underdetermined {
                m: sketches.m,
                r: self.rank,
            });
        }
        let max = sketches.n.min(sketches.q);
        if self.rank > max {
            return Err(Self::invalid("r", format!("rank {} exceeds min(n, q) = {max}", self.rank)));
        }
        match (self.split, sketches.mode) {
            (false, SplitMode::Shared) => {}
            (true, SplitMode::Split { iterations }) if iterations >= self.iterations => {}
            (true, SplitMode::Split { iterations }) => {
                return Err(Self::invalid(
                    "split",
                    format!("sketches cover {iterations} iterations but T = {}", self.iterations),
                ))
            }
            (true, SplitMode::Shared) => {
                return Err(Self::invalid("split", "split mode requested but sketches are shared"))
            }
            (false, SplitMode::Split { .. }) => {
                return Err(Self::invalid("split", "sketches are sample-split but split mode is off"))
            }
        }
        if let Some(gt) = gt {
            if gt.n != sketches.n || gt.q != sketches.q {
                return Err(SolverError::DimensionMismatch(format!(
                    "ground truth is {}x{} but sketches cover {}x{}",
                    gt.n, gt.q, sketches.n, sketches.q
                )));
            }
        }
        Ok(())
    }

    /// The truncation constant in effect for a run.
    pub fn resolve_c_tilde(&self, gt: Option<&GroundTruth>) -> Result<f64, SolverError> {
        match (self.c_tilde, gt) {
            (Some(c), _) => Ok(c),
            (None, Some(gt)) => Ok(gt.default_c_tilde()),
            (None, None) => Err(Self::invalid(
                "c_tilde",
                "no truncation constant given and no ground truth to derive 9κ²μ² from",
            )),
        }
    }
}
