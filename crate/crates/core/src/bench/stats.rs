use crate::solver::ConvergenceTrace;

/// Median of the finite values; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Upper end of the local-contraction regime, `0.02 / (√r κ²)`.
pub fn contraction_regime_upper(r: usize, kappa: f64) -> f64 {
    0.02 / ((r as f64).sqrt() * kappa * kappa)
}

/// Lower end of the regime; below it rounding noise dominates.
pub const CONTRACTION_REGIME_LOWER: f64 = 1e-9;

/// Per-iteration contraction bound `1 − 0.6 c_η/κ² + slack`.
pub fn contraction_bound(c_eta: f64, kappa: f64, slack: f64) -> f64 {
    1.0 - 0.6 * c_eta / (kappa * kappa) + slack
}

fn in_regime(se2: f64, upper: f64) -> bool {
    (CONTRACTION_REGIME_LOWER..=upper).contains(&se2)
}

/// `SE₂(U_{t+1}) / SE₂(U_t)` for consecutive iterates that both lie in
/// `[1e-9, 0.02/(√r κ²)]`.
pub fn contraction_ratios(trace: &ConvergenceTrace, r: usize, kappa: f64) -> Vec<f64> {
    let upper = contraction_regime_upper(r, kappa);
    let se = trace.se2_series();
    se.windows(2)
        .filter(|w| in_regime(w[0], upper) && in_regime(w[1], upper))
        .map(|w| w[1] / w[0])
        .collect()
}

/// Coefficient of determination of a least-squares line through
/// `(iter, ln SE₂)` over the iterates inside the contraction regime.
/// `None` with fewer than three such iterates.
pub fn log_linear_r2(trace: &ConvergenceTrace, r: usize, kappa: f64) -> Option<f64> {
    let upper = contraction_regime_upper(r, kappa);
    let points: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter_map(|rec| rec.se2.filter(|&s| in_regime(s, upper)).map(|s| (rec.iter as f64, s.ln())))
        .collect();
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return Some(1.0);
    }
    Some(sxy * sxy / (sxx * syy))
}
