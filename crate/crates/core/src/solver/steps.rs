use rayon::prelude::*;

use super::SolverError;
use crate::linalg::{
    least_squares, qr_orthonormalize, top_r_with_leading_value, ExactMatrixSum, ExactSum, LinalgError,
    Matrix, OrthonormalBasis, Vector,
};
use crate::model::{ColumnSketch, Phase};

/// `α = c̃ · (Σ_{k,i} y_ki²) / (m q)` from the already-summed squares.
pub(crate) fn alpha_from_sum(sum_sq: f64, m: usize, q: usize, c_tilde: f64) -> f64 {
    c_tilde * sum_sq / (m as f64 * q as f64)
}

pub(crate) fn squares_sum<'a>(columns: impl IntoIterator<Item = &'a ColumnSketch>) -> ExactSum {
    let mut acc = ExactSum::new();
    for c in columns {
        for v in c.y.iter() {
            acc.add(v * v);
        }
    }
    acc
}

/// Truncation threshold `α = c̃ (1/mq) Σ_{k,i} y_ki²` over one measurement set.
pub fn compute_alpha(phase: &Phase, c_tilde: f64) -> Result<f64, SolverError> {
    let (m, q) = (phase.m(), phase.q());
    if m == 0 || q == 0 {
        return Err(SolverError::EmptyPhase(phase.label));
    }
    let sum = squares_sum(&phase.columns).value();
    Ok(alpha_from_sum(sum, m, q, c_tilde))
}

/// Zeroes every entry with `|y_j| > √α`.
pub fn truncate(y: &Vector, alpha: f64) -> Vector {
    let threshold = alpha.sqrt();
    y.map(|v| if v.abs() <= threshold { v } else { 0.0 })
}

/// Column `k` of `X̂₀`: `(1/m) A_kᵀ trunc(y_k, α)`.
pub(crate) fn column_init(c: &ColumnSketch, alpha: f64) -> Vector {
    let m = c.y.len() as f64;
    let mut col = c.a.tr_mul(&truncate(&c.y, alpha));
    col.iter_mut().for_each(|v| *v /= m);
    col
}

/// `X̂₀ = (1/m) Σ_k A_kᵀ trunc(y_k, α) e_kᵀ`.
pub fn init_matrix(phase: &Phase, alpha: f64) -> Result<Matrix, SolverError> {
    if phase.q() == 0 || phase.m() == 0 {
        return Err(SolverError::EmptyPhase(phase.label));
    }
    let columns: Vec<Vector> = phase.columns.par_iter().map(|c| column_init(c, alpha)).collect();
    Ok(Matrix::from_columns(&columns))
}

/// Top-`r` left singular basis of `X̂₀`.
pub fn spectral_init(phase: &Phase, alpha: f64, r: usize) -> Result<OrthonormalBasis, SolverError> {
    spectral_init_with_sigma(phase, alpha, r).map(|(u, _)| u)
}

/// [`spectral_init`] that also returns `σ₁(X̂₀)`.
pub fn spectral_init_with_sigma(
    phase: &Phase,
    alpha: f64,
    r: usize,
) -> Result<(OrthonormalBasis, f64), SolverError> {
    let x0 = init_matrix(phase, alpha)?;
    Ok(top_r_with_leading_value(&x0, r)?)
}

/// `A_k U`, the `m x r` reduced sensing matrix of one column.
pub(crate) fn column_products(c: &ColumnSketch, u: &OrthonormalBasis) -> Matrix {
    &c.a * u.matrix()
}

pub(crate) fn column_least_squares(au: &Matrix, y: &Vector, column: usize) -> Result<Vector, SolverError> {
    least_squares(au, y).map_err(|e| match e {
        LinalgError::RankDeficient { .. } => SolverError::RankDeficient { column },
        other => SolverError::Linalg(other),
    })
}

/// `A_kᵀ (A_k U b_k − y_k)`; the column's gradient term is this vector
/// times `b_kᵀ`.
pub(crate) fn gradient_contribution(c: &ColumnSketch, au: &Matrix, b_k: &Vector) -> Vector {
    let residual = au * b_k - &c.y;
    c.a.tr_mul(&residual)
}

fn check_basis(u: &OrthonormalBasis, phase: &Phase) -> Result<(), SolverError> {
    if phase.q() == 0 || phase.m() == 0 {
        return Err(SolverError::EmptyPhase(phase.label));
    }
    if u.dim() != phase.n() {
        return Err(SolverError::DimensionMismatch(format!(
            "basis has {} rows but sketches have {} columns",
            u.dim(),
            phase.n()
        )));
    }
    if phase.m() < u.rank() {
        return Err(SolverError::Underdetermined {
            m: phase.m(),
            r: u.rank(),
        });
    }
    Ok(())
}

/// `b_k = (A_k U)† y_k` for every column; returns `B` (`r x q`).
pub fn min_step(u: &OrthonormalBasis, phase: &Phase) -> Result<Matrix, SolverError> {
    check_basis(u, phase)?;
    let columns: Vec<Vector> = phase
        .columns
        .par_iter()
        .enumerate()
        .map(|(k, c)| column_least_squares(&column_products(c, u), &c.y, k))
        .collect::<Result<_, _>>()?;
    Ok(Matrix::from_columns(&columns))
}

/// `∇_U f(U, B) = Σ_k A_kᵀ (A_k U b_k − y_k) b_kᵀ`.
///
/// Per-column terms are computed independently and combined with an exact
/// accumulator, so the result is the correctly rounded sum regardless of
/// scheduling or of how the columns are grouped.
pub fn gradient(u: &OrthonormalBasis, b: &Matrix, phase: &Phase) -> Result<Matrix, SolverError> {
    check_basis(u, phase)?;
    if b.shape() != (u.rank(), phase.q()) {
        return Err(SolverError::DimensionMismatch(format!(
            "B is {:?}, expected {}x{}",
            b.shape(),
            u.rank(),
            phase.q()
        )));
    }
    let terms: Vec<Vector> = phase
        .columns
        .par_iter()
        .enumerate()
        .map(|(k, c)| gradient_contribution(c, &column_products(c, u), &b.column(k).into_owned()))
        .collect();
    let mut acc = ExactMatrixSum::zeros(u.dim(), u.rank());
    for (k, g) in terms.iter().enumerate() {
        acc.add_outer(g, b.column(k).as_slice());
    }
    Ok(acc.value())
}

/// `U⁺ = QR(U − step · grad)`, where `step` is the full multiplier applied
/// to the raw gradient (`c_η / (m σ̂_max²)` in the solver).
pub fn gd_step(u: &OrthonormalBasis, grad: &Matrix, step: f64) -> Result<OrthonormalBasis, SolverError> {
    if grad.shape() != u.matrix().shape() {
        return Err(SolverError::DimensionMismatch(format!(
            "gradient is {:?} but basis is {:?}",
            grad.shape(),
            u.matrix().shape()
        )));
    }
    if step == 0.0 || grad.iter().all(|&g| g == 0.0) {
        return Ok(u.clone());
    }
    let moved = u.matrix() - grad * step;
    Ok(qr_orthonormalize(&moved)?.0)
}
