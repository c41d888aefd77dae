use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::perturbed_basis;
use super::quadrature::beta;
use crate::linalg::{singular_values, ExactMatrixSum, Matrix};
use crate::model::{generate_ground_truth, sketch_phase, GroundTruth, PhaseLabel, SeedSpec};
use crate::solver::{compute_alpha, init_matrix, min_step};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitCheckParams {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub m: usize,
    pub samples: usize,
}

impl Default for InitCheckParams {
    fn default() -> Self {
        Self {
            n: 8,
            q: 8,
            r: 2,
            m: 20,
            samples: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSuiteParams {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub kappa: f64,
    pub m: usize,
    /// `SE₂(U, U⋆)` of the basis the min step is evaluated at.
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Relative half-width of the threshold event
    /// `C̃(1 ± ε)‖X⋆‖_F²/q`.
    pub epsilon: f64,
    /// Relative slack on the Frobenius coefficient bound.
    pub fro_slack: f64,
    /// Relative slack on the singular-value bounds.
    pub sigma_slack: f64,
    pub init: InitCheckParams,
}

impl Default for LemmaSuiteParams {
    fn default() -> Self {
        Self {
            n: 100,
            q: 200,
            r: 2,
            kappa: 2.0,
            m: 200,
            delta: 0.01,
            trials: 50,
            seed: 0,
            epsilon: 0.1,
            fro_slack: 0.25,
            sigma_slack: 0.05,
            init: InitCheckParams::default(),
        }
    }
}

/// How often a high-probability bound held.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventFrequency {
    pub name: String,
    pub bound: String,
    pub holds: usize,
    pub total: usize,
    pub frequency: f64,
}

impl EventFrequency {
    fn new(name: &str, bound: &str) -> Self {
        Self {
            name: name.to_string(),
            bound: bound.to_string(),
            holds: 0,
            total: 0,
            frequency: f64::NAN,
        }
    }

    fn record(&mut self, holds: bool) {
        self.total += 1;
        self.holds += usize::from(holds);
    }

    fn finish(mut self) -> Self {
        if self.total > 0 {
            self.frequency = self.holds as f64 / self.total as f64;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaReport {
    pub epsilon: f64,
    /// `min_k β_k(α)` at the lower edge `α = C̃(1 − ε)‖X⋆‖_F²/q`, minimized over
    /// trials; `β_k` is increasing in `α`, so this bounds the whole event.
    pub min_beta_event: f64,
    /// `min_k β_k(α)` at thresholds computed from fresh measurements.
    pub min_beta_measured: f64,
    /// Fraction of measured thresholds that fall inside the event.
    pub alpha_in_event_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitExpectationCase {
    pub label: String,
    pub c_tilde: f64,
    pub alpha: f64,
    pub samples: usize,
    pub min_beta: f64,
    pub max_beta: f64,
    /// `‖mean(X̂₀) − X⋆ D(α)‖_F / ‖X⋆ D(α)‖_F`.
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub params: LemmaSuiteParams,
    /// Per column: `‖g_k − b_k‖ ≤ 0.4 ‖(I − UUᵀ) x⋆_k‖`.
    pub ls_error: EventFrequency,
    /// Per-column and per-trial bounds on the min-step output.
    pub items: Vec<EventFrequency>,
    pub beta: BetaReport,
    pub init_expectation: Vec<InitExpectationCase>,
    pub runtime_ms: f64,
    pub errors: Vec<String>,
}

impl LemmaReport {
    pub fn item(&self, name: &str) -> Option<&EventFrequency> {
        self.items.iter().find(|e| e.name == name)
    }
}

struct Events {
    ls_error: EventFrequency,
    coef_error_col: EventFrequency,
    coef_norm_col: EventFrequency,
    coef_error_fro: EventFrequency,
    coef_error_fro_slack: EventFrequency,
    col_error: EventFrequency,
    x_error_fro: EventFrequency,
    sigma_min: EventFrequency,
    sigma_min_slack: EventFrequency,
    sigma_max: EventFrequency,
    sigma_max_slack: EventFrequency,
}

impl Events {
    fn new(p: &LemmaSuiteParams) -> Self {
        Self {
            ls_error: EventFrequency::new("ls_error_column", "‖g_k − b_k‖ ≤ 0.4‖(I − UUᵀ)x⋆_k‖"),
            coef_error_col: EventFrequency::new("coef_error_column", "‖b_k − g_k‖ ≤ 0.4δ‖b⋆_k‖"),
            coef_norm_col: EventFrequency::new("coef_norm_column", "‖b_k‖ ≤ 1.1‖b⋆_k‖"),
            coef_error_fro: EventFrequency::new("coef_error_fro", "‖B − G‖_F ≤ 0.4√r δ σ⋆_max"),
            coef_error_fro_slack: EventFrequency::new(
                "coef_error_fro_slack",
                &format!("‖B − G‖_F ≤ 0.4√r δ σ⋆_max (1 + {})", p.fro_slack),
            ),
            col_error: EventFrequency::new("col_error_column", "‖x_k − x⋆_k‖ ≤ 1.4δ‖b⋆_k‖"),
            x_error_fro: EventFrequency::new("x_error_fro", "‖X − X⋆‖_F ≤ 1.4√r δ σ⋆_max"),
            sigma_min: EventFrequency::new("sigma_min_b", "σ_min(B) ≥ 0.9σ⋆_min"),
            sigma_min_slack: EventFrequency::new(
                "sigma_min_b_slack",
                &format!("σ_min(B) ≥ 0.9σ⋆_min (1 − {})", p.sigma_slack),
            ),
            sigma_max: EventFrequency::new("sigma_max_b", "σ_max(B) ≤ 1.1σ⋆_max"),
            sigma_max_slack: EventFrequency::new(
                "sigma_max_b_slack",
                &format!("σ_max(B) ≤ 1.1σ⋆_max (1 + {})", p.sigma_slack),
            ),
        }
    }
}

fn min_step_trial(p: &LemmaSuiteParams, gt: &GroundTruth, root: &SeedSpec, ev: &mut Events) -> Result<(), String> {
    let u = perturbed_basis(&gt.u_star, p.delta, &root.derive("perturbation", 0)).map_err(|e| e.to_string())?;
    let phase = sketch_phase(&gt.x_star, p.m, PhaseLabel::Ls(1), &root.derive("ls", 0)).map_err(|e| e.to_string())?;
    let b = min_step(&u, &phase).map_err(|e| e.to_string())?;
    let g = u.matrix().tr_mul(&gt.x_star);
    let x = u.matrix() * &b;
    let d = p.delta;
    let rt = (p.r as f64).sqrt();
    let (smax, smin) = (gt.sigma_max(), gt.sigma_min());
    for k in 0..p.q {
        let xk = gt.x_star.column(k);
        let residual = (xk - u.matrix() * u.matrix().tr_mul(&xk)).norm();
        let bstar = gt.b_star.column(k).norm();
        let err = (b.column(k) - g.column(k)).norm();
        ev.ls_error.record(err <= 0.4 * residual);
        ev.coef_error_col.record(err <= 0.4 * d * bstar);
        ev.coef_norm_col.record(b.column(k).norm() <= 1.1 * bstar);
        ev.col_error.record((x.column(k) - xk).norm() <= 1.4 * d * bstar);
    }
    let fro = (&b - &g).norm();
    ev.coef_error_fro.record(fro <= 0.4 * rt * d * smax);
    ev.coef_error_fro_slack.record(fro <= 0.4 * rt * d * smax * (1.0 + p.fro_slack));
    ev.x_error_fro.record((&x - &gt.x_star).norm() <= 1.4 * rt * d * smax);
    let sv = singular_values(&b);
    let (bmax, bmin) = (sv[0], sv[sv.len() - 1]);
    ev.sigma_min.record(bmin >= 0.9 * smin);
    ev.sigma_min_slack.record(bmin >= 0.9 * smin * (1.0 - p.sigma_slack));
    ev.sigma_max.record(bmax <= 1.1 * smax);
    ev.sigma_max_slack.record(bmax <= 1.1 * smax * (1.0 + p.sigma_slack));
    Ok(())
}

fn min_beta(gt: &GroundTruth, alpha: f64) -> f64 {
    gt.x_star
        .column_iter()
        .map(|c| beta(alpha, c.norm()))
        .fold(f64::INFINITY, f64::min)
}

fn init_expectation(
    gt: &GroundTruth,
    label: &str,
    c_tilde: f64,
    alpha: f64,
    p: &InitCheckParams,
    root: &SeedSpec,
) -> Result<InitExpectationCase, String> {
    let betas: Vec<f64> = gt.x_star.column_iter().map(|c| beta(alpha, c.norm())).collect();
    let mut target = gt.x_star.clone();
    for (k, b) in betas.iter().enumerate() {
        target.column_mut(k).scale_mut(*b);
    }
    let mut sum = ExactMatrixSum::zeros(p.n, p.q);
    for i in 0..p.samples {
        let phase = sketch_phase(&gt.x_star, p.m, PhaseLabel::Init, &root.derive(&format!("init/{label}"), i as u64))
            .map_err(|e| e.to_string())?;
        sum.add_matrix(&init_matrix(&phase, alpha).map_err(|e| e.to_string())?);
    }
    let mean: Matrix = sum.value() / p.samples as f64;
    Ok(InitExpectationCase {
        label: label.to_string(),
        c_tilde,
        alpha,
        samples: p.samples,
        min_beta: betas.iter().copied().fold(f64::INFINITY, f64::min),
        max_beta: betas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        rel_err: (&mean - &target).norm() / target.norm(),
    })
}

/// Measures how often each high-probability bound on the min step holds at
/// a basis with `SE₂ = δ`, evaluates the truncation shrinkage `β_k` by
/// quadrature on the threshold event, and checks `E[X̂₀ | α] = X⋆ D(α)` by
/// Monte Carlo. Failed bounds are recorded, never raised.
pub fn lemma_event_suite(params: &LemmaSuiteParams) -> LemmaReport {
    let start = Instant::now();
    let root = SeedSpec::new(params.seed);
    let mut ev = Events::new(params);
    let mut errors = Vec::new();
    let mut min_beta_event = f64::INFINITY;
    let mut min_beta_measured = f64::INFINITY;
    let mut in_event = EventFrequency::new("alpha_in_event", "");

    for trial in 0..params.trials {
        let trial_root = root.derive("trial", trial as u64);
        let gt = match generate_ground_truth(params.n, params.q, params.r, params.kappa, &trial_root.derive("truth", 0)) {
            Ok(gt) => gt,
            Err(e) => {
                errors.push(format!("trial {trial}: {e}"));
                continue;
            }
        };
        if let Err(e) = min_step_trial(params, &gt, &trial_root, &mut ev) {
            errors.push(format!("trial {trial}: {e}"));
        }
        let c_tilde = gt.default_c_tilde();
        let scale = c_tilde * gt.x_star.norm_squared() / params.q as f64;
        min_beta_event = min_beta_event.min(min_beta(&gt, scale * (1.0 - params.epsilon)));
        match sketch_phase(&gt.x_star, params.m, PhaseLabel::Alpha, &trial_root.derive("alpha", 0))
            .map_err(|e| e.to_string())
            .and_then(|ph| compute_alpha(&ph, c_tilde).map_err(|e| e.to_string()))
        {
            Ok(alpha) => {
                min_beta_measured = min_beta_measured.min(min_beta(&gt, alpha));
                in_event.record((scale * (1.0 - params.epsilon)..=scale * (1.0 + params.epsilon)).contains(&alpha));
            }
            Err(e) => errors.push(format!("trial {trial}: {e}")),
        }
    }

    let mut init_cases = Vec::new();
    let ip = &params.init;
    let init_root = root.derive("init", 0);
    let init_kappa = if ip.r == 1 { 1.0 } else { params.kappa };
    match generate_ground_truth(ip.n, ip.q, ip.r, init_kappa, &init_root.derive("truth", 0)) {
        Ok(gt) => {
            let c_default = gt.default_c_tilde();
            let alpha_default = sketch_phase(&gt.x_star, ip.m, PhaseLabel::Alpha, &init_root.derive("alpha", 0))
                .map_err(|e| e.to_string())
                .and_then(|ph| compute_alpha(&ph, c_default).map_err(|e| e.to_string()));
            let cases = [
                ("default_c_tilde", c_default, alpha_default),
                ("unit_c_tilde", 1.0, Ok(gt.x_star.norm_squared() / ip.q as f64)),
            ];
            for (label, c, alpha) in cases {
                match alpha.and_then(|a| init_expectation(&gt, label, c, a, ip, &init_root)) {
                    Ok(case) => init_cases.push(case),
                    Err(e) => errors.push(format!("init {label}: {e}")),
                }
            }
        }
        Err(e) => errors.push(format!("init: {e}")),
    }

    let in_event = in_event.finish();
    LemmaReport {
        params: params.clone(),
        ls_error: ev.ls_error.finish(),
        items: vec![
            ev.coef_error_col.finish(),
            ev.coef_norm_col.finish(),
            ev.coef_error_fro.finish(),
            ev.coef_error_fro_slack.finish(),
            ev.col_error.finish(),
            ev.x_error_fro.finish(),
            ev.sigma_min.finish(),
            ev.sigma_min_slack.finish(),
            ev.sigma_max.finish(),
            ev.sigma_max_slack.finish(),
        ],
        beta: BetaReport {
            epsilon: params.epsilon,
            min_beta_event,
            min_beta_measured,
            alpha_in_event_frequency: in_event.frequency,
        },
        init_expectation: init_cases,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        errors,
    }
}
