use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::perturbed_basis;
use crate::linalg::{ExactMatrixSum, Matrix, OrthonormalBasis};
use crate::model::{
    gaussian_matrix, generate_ground_truth, sketch_phase, ColumnSketch, Phase, PhaseLabel, SeedSpec, StreamLabel,
};
use crate::solver::{gradient, min_step};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCaseSpec {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientSuiteParams {
    pub sizes: Vec<GradientCaseSpec>,
    pub seeds: Vec<u64>,
    /// Random directions per finite-difference check.
    pub directions: usize,
    pub fd_step: f64,
    /// Fresh measurement sets averaged in the expected-gradient check.
    pub mc_samples: usize,
    /// Condition number of the planted instances (forced to 1 when `r = 1`).
    pub kappa: f64,
    /// `SE₂` between the evaluation basis and `U⋆`.
    pub perturbation: f64,
}

impl Default for GradientSuiteParams {
    fn default() -> Self {
        Self {
            sizes: vec![GradientCaseSpec { n: 20, q: 10, r: 2, m: 15 }],
            seeds: vec![0],
            directions: 20,
            fd_step: 1e-6,
            mc_samples: 2000,
            kappa: 2.0,
            perturbation: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCase {
    pub size: GradientCaseSpec,
    pub seed: u64,
    /// Largest `|fd − ⟨∇f, Δ⟩| / |⟨∇f, Δ⟩|` over the probe directions.
    pub fd_max_rel_err: f64,
    /// `‖mean(∇f/m) − (X − X⋆)Bᵀ‖_F / ‖(X − X⋆)Bᵀ‖_F`.
    pub expected_rel_err: f64,
    pub mc_samples: usize,
    /// Largest gradient entry when every measurement equals `A_k U b_k`.
    pub zero_residual_max_abs: f64,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub params: GradientSuiteParams,
    pub cases: Vec<GradientCase>,
    pub fd_max_rel_err: f64,
    pub expected_max_rel_err: f64,
    pub zero_residual_max_abs: f64,
}

/// `½ Σ_k ‖y_k − A_k U b_k‖²`, whose gradient in `U` is exactly the
/// solver's `Σ_k A_kᵀ (A_k U b_k − y_k) b_kᵀ`.
pub fn half_squared_residual(u: &Matrix, b: &Matrix, phase: &Phase) -> f64 {
    phase
        .columns
        .iter()
        .enumerate()
        .map(|(k, c)| (&c.y - &c.a * (u * b.column(k))).norm_squared())
        .sum::<f64>()
        * 0.5
}

fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn finite_difference_error(
    u: &OrthonormalBasis,
    b: &Matrix,
    phase: &Phase,
    params: &GradientSuiteParams,
    seed: &SeedSpec,
) -> Result<f64, String> {
    let grad = gradient(u, b, phase).map_err(|e| e.to_string())?;
    let h = params.fd_step;
    let mut worst = 0.0_f64;
    for i in 0..params.directions {
        let mut dir = gaussian_matrix(u.dim(), u.rank(), &mut seed.stream(StreamLabel::Auxiliary, i as u64));
        dir /= dir.norm();
        let plus = half_squared_residual(&(u.matrix() + &dir * h), b, phase);
        let minus = half_squared_residual(&(u.matrix() - &dir * h), b, phase);
        let fd = (plus - minus) / (2.0 * h);
        let analytic = inner(&grad, &dir);
        let err = (fd - analytic).abs() / analytic.abs();
        worst = if err.is_nan() { f64::NAN } else { worst.max(err) };
    }
    Ok(worst)
}

fn zero_residual_phase(u: &OrthonormalBasis, b: &Matrix, phase: &Phase) -> Phase {
    Phase {
        label: phase.label,
        columns: phase
            .columns
            .iter()
            .enumerate()
            .map(|(k, c)| ColumnSketch {
                a: c.a.clone(),
                y: (&c.a * u.matrix()) * b.column(k),
            })
            .collect(),
    }
}

fn run_case(size: GradientCaseSpec, seed: u64, params: &GradientSuiteParams) -> Result<GradientCase, String> {
    let start = Instant::now();
    let root = SeedSpec::new(seed);
    let kappa = if size.r == 1 { 1.0 } else { params.kappa };
    let gt = generate_ground_truth(size.n, size.q, size.r, kappa, &root.derive("truth", 0)).map_err(|e| e.to_string())?;
    let u = perturbed_basis(&gt.u_star, params.perturbation, &root.derive("perturbation", 0)).map_err(|e| e.to_string())?;
    let ls = sketch_phase(&gt.x_star, size.m, PhaseLabel::Ls(1), &root.derive("ls", 0)).map_err(|e| e.to_string())?;
    let b = min_step(&u, &ls).map_err(|e| e.to_string())?;

    let probe = sketch_phase(&gt.x_star, size.m, PhaseLabel::Gd(1), &root.derive("fd", 0)).map_err(|e| e.to_string())?;
    let fd_max_rel_err = finite_difference_error(&u, &b, &probe, params, &root.derive("directions", 0))?;

    let zero = zero_residual_phase(&u, &b, &probe);
    let zero_residual_max_abs = gradient(&u, &b, &zero)
        .map_err(|e| e.to_string())?
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));

    let mut mean = ExactMatrixSum::zeros(size.n, size.r);
    let m = size.m as f64;
    for i in 0..params.mc_samples {
        let phase = sketch_phase(&gt.x_star, size.m, PhaseLabel::Gd(1), &root.derive("expected", i as u64))
            .map_err(|e| e.to_string())?;
        mean.add_matrix(&(gradient(&u, &b, &phase).map_err(|e| e.to_string())? / m));
    }
    let mean = mean.value() / params.mc_samples as f64;
    let target = (u.matrix() * &b - &gt.x_star) * b.transpose();
    let expected_rel_err = (&mean - &target).norm() / target.norm();

    Ok(GradientCase {
        size,
        seed,
        fd_max_rel_err,
        expected_rel_err,
        mc_samples: params.mc_samples,
        zero_residual_max_abs,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        error: None,
    })
}

/// Finite-difference, expected-gradient and zero-residual checks of the
/// solver gradient for every (size, seed) pair. Failures become report
/// entries with `NaN` errors.
pub fn gradient_oracle_suite(params: &GradientSuiteParams) -> GradientReport {
    let mut cases = Vec::new();
    for &size in &params.sizes {
        for &seed in &params.seeds {
            cases.push(run_case(size, seed, params).unwrap_or_else(|e| GradientCase {
                size,
                seed,
                fd_max_rel_err: f64::NAN,
                expected_rel_err: f64::NAN,
                mc_samples: params.mc_samples,
                zero_residual_max_abs: f64::NAN,
                runtime_ms: 0.0,
                error: Some(e),
            }));
        }
    }
    let worst = |f: fn(&GradientCase) -> f64| {
        cases
            .iter()
            .map(f)
            .fold(0.0_f64, |acc, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) })
    };
    GradientReport {
        fd_max_rel_err: worst(|c| c.fd_max_rel_err),
        expected_max_rel_err: worst(|c| c.expected_rel_err),
        zero_residual_max_abs: worst(|c| c.zero_residual_max_abs),
        params: params.clone(),
        cases,
    }
}
