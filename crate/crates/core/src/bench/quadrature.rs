use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

const NODES_PER_PANEL: usize = 20;
/// Beyond this many standard deviations the Gaussian mass is below 1e-20.
const TAIL_CUTOFF: f64 = 10.0;

fn standard_normal_density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[ζ² 1{|ζ| ≤ t}]` for standard normal `ζ`, by composite Gauss–Legendre
/// quadrature on unit-width panels of `[0, t]`.
pub fn truncated_second_moment(t: f64) -> f64 {
    if t.is_nan() || t <= 0.0 {
        return 0.0;
    }
    let t = t.min(TAIL_CUTOFF);
    let rule = GaussLegendre::new(NonZeroUsize::new(NODES_PER_PANEL).expect("non-zero"));
    let panels = t.ceil() as usize;
    let width = t / panels as f64;
    let half: f64 = (0..panels)
        .map(|i| {
            let a = i as f64 * width;
            rule.integrate(a, a + width, |z| z * z * standard_normal_density(z))
        })
        .sum();
    2.0 * half
}

/// `β_k(α) = E[ζ² 1{‖x_k‖² ζ² ≤ α}]`, the shrinkage truncation applies to
/// column `k` of the initial estimate in expectation.
pub fn beta(alpha: f64, column_norm: f64) -> f64 {
    if column_norm == 0.0 {
        return if alpha >= 0.0 { 1.0 } else { 0.0 };
    }
    truncated_second_moment(alpha.sqrt() / column_norm)
}
