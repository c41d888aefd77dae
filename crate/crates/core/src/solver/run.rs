use std::time::Instant;

use super::config::{SigmaMaxMode, SIGMA_ESTIMATE_SHRINKAGE};
use super::steps::{column_init, squares_sum};
use super::trace::measure;
use super::{
    alpha_from_sum, column_least_squares, column_products, gd_step, gradient_contribution, ConvergenceTrace,
    IterationRecord, SolverConfig, SolverError,
};
use crate::linalg::{subspace_distance_2, top_r_with_leading_value, ExactMatrixSum, Matrix, OrthonormalBasis, Vector};
use crate::model::{
    write_factors, GroundTruth, ModelError, Phase, PhaseLabel, SketchSet, SplitMode,
};

/// The algorithm state: `X = U B`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorEstimate {
    pub u: OrthonormalBasis,
    pub b: Matrix,
}

impl FactorEstimate {
    pub fn x(&self) -> Matrix {
        self.u.matrix() * &self.b
    }

    /// Serializes into the binary container of [`crate::model`].
    pub fn write_to(&self, w: &mut impl std::io::Write) -> Result<(), ModelError> {
        write_factors(w, &self.u, &self.b)
    }

    pub fn read_from(r: &mut impl std::io::Read) -> Result<Self, ModelError> {
        let (u, b) = crate::model::read_factors(r)?;
        Ok(Self { u, b })
    }
}

/// Where the per-column work of a run happens. The driver owns the
/// schedule, the step-size rule and the trace; backends own the data.
pub(crate) trait Backend {
    fn sketches(&self) -> &SketchSet;
    fn sum_of_squares(&mut self) -> Result<f64, SolverError>;
    fn init_matrix(&mut self, alpha: f64) -> Result<Matrix, SolverError>;
    /// Makes `u` (the iterate after `iter` steps) available to every worker.
    fn broadcast(&mut self, iter: usize, u: &OrthonormalBasis);
    fn min_step(&mut self, u: &OrthonormalBasis, label: PhaseLabel) -> Result<Matrix, SolverError>;
    fn gradient(&mut self, u: &OrthonormalBasis, b: &Matrix, label: PhaseLabel) -> Result<Matrix, SolverError>;
}

pub(crate) fn phase_of(sketches: &SketchSet, label: PhaseLabel) -> Result<&Phase, SolverError> {
    let phase = sketches.phase(label).ok_or(SolverError::MissingPhase(label))?;
    if phase.q() == 0 || phase.m() == 0 {
        return Err(SolverError::EmptyPhase(label));
    }
    Ok(phase)
}

/// Per-column `A_k U` products kept from the last least-squares step, so a
/// gradient on the same measurement set and basis does not recompute them.
#[derive(Default)]
pub(crate) struct ProductCache {
    key: Option<(PhaseLabel, Matrix)>,
    products: Vec<Matrix>,
}

impl ProductCache {
    pub(crate) fn store(&mut self, label: PhaseLabel, u: &OrthonormalBasis, products: Vec<Matrix>) {
        self.key = Some((label, u.matrix().clone()));
        self.products = products;
    }

    pub(crate) fn lookup(&self, label: PhaseLabel, u: &OrthonormalBasis) -> Option<&[Matrix]> {
        match &self.key {
            Some((l, m)) if *l == label && m == u.matrix() => Some(&self.products),
            _ => None,
        }
    }
}

/// Least squares for a set of columns; returns the coefficients and the
/// `A_k U` products, in the order given.
pub(crate) fn solve_columns<'a>(
    columns: impl Iterator<Item = (usize, &'a crate::model::ColumnSketch)> + Send,
    u: &OrthonormalBasis,
) -> Result<(Vec<Vector>, Vec<Matrix>), SolverError> {
    use rayon::prelude::*;
    let items: Vec<_> = columns.collect();
    let solved: Vec<(Vector, Matrix)> = items
        .par_iter()
        .map(|(k, c)| {
            let au = column_products(c, u);
            column_least_squares(&au, &c.y, *k).map(|b| (b, au))
        })
        .collect::<Result<_, _>>()?;
    Ok(solved.into_iter().unzip())
}

/// Exact gradient accumulator over a set of columns with their
/// coefficients and (optionally cached) products.
pub(crate) fn accumulate_gradient(
    columns: &[(usize, &crate::model::ColumnSketch)],
    coefficients: &[Vector],
    products: Option<&[Matrix]>,
    u: &OrthonormalBasis,
) -> ExactMatrixSum {
    use rayon::prelude::*;
    let terms: Vec<Vector> = columns
        .par_iter()
        .enumerate()
        .map(|(i, (_, c))| match products {
            Some(p) => gradient_contribution(c, &p[i], &coefficients[i]),
            None => gradient_contribution(c, &column_products(c, u), &coefficients[i]),
        })
        .collect();
    let mut acc = ExactMatrixSum::zeros(u.dim(), u.rank());
    for (g, b) in terms.iter().zip(coefficients) {
        acc.add_outer(g, b.as_slice());
    }
    acc
}

struct CentralBackend<'a> {
    sketches: &'a SketchSet,
    cache: ProductCache,
}

impl Backend for CentralBackend<'_> {
    fn sketches(&self) -> &SketchSet {
        self.sketches
    }

    fn sum_of_squares(&mut self) -> Result<f64, SolverError> {
        let phase = phase_of(self.sketches, PhaseLabel::Alpha)?;
        Ok(squares_sum(&phase.columns).value())
    }

    fn init_matrix(&mut self, alpha: f64) -> Result<Matrix, SolverError> {
        let phase = phase_of(self.sketches, PhaseLabel::Init)?;
        let cols: Vec<Vector> = phase.columns.iter().map(|c| column_init(c, alpha)).collect();
        Ok(Matrix::from_columns(&cols))
    }

    fn broadcast(&mut self, _iter: usize, _u: &OrthonormalBasis) {}

    fn min_step(&mut self, u: &OrthonormalBasis, label: PhaseLabel) -> Result<Matrix, SolverError> {
        let phase = phase_of(self.sketches, label)?;
        let (b, products) = solve_columns(phase.columns.iter().enumerate(), u)?;
        self.cache.store(label, u, products);
        Ok(Matrix::from_columns(&b))
    }

    fn gradient(&mut self, u: &OrthonormalBasis, b: &Matrix, label: PhaseLabel) -> Result<Matrix, SolverError> {
        let phase = phase_of(self.sketches, label)?;
        let columns: Vec<_> = phase.columns.iter().enumerate().collect();
        let coefficients: Vec<Vector> = b.column_iter().map(|c| c.into_owned()).collect();
        let acc = accumulate_gradient(&columns, &coefficients, self.cache.lookup(label, u), u);
        Ok(acc.value())
    }
}

fn ls_label(mode: SplitMode, t: usize) -> PhaseLabel {
    match mode {
        SplitMode::Shared => PhaseLabel::Shared,
        SplitMode::Split { .. } => PhaseLabel::Ls(t),
    }
}

fn gd_label(mode: SplitMode, t: usize) -> PhaseLabel {
    match mode {
        SplitMode::Shared => PhaseLabel::Shared,
        SplitMode::Split { .. } => PhaseLabel::Gd(t),
    }
}

/// Runs initialization and the GDmin iterations against any backend.
///
/// Record `t` describes `U_t` together with `B = argmin_B f(U_t, B)`
/// computed on the least-squares set of iteration `t + 1`, which is the
/// coefficient matrix the next gradient uses. After the last iteration the
/// read-out reuses the final least-squares set.
pub(crate) fn drive(
    cfg: &SolverConfig,
    backend: &mut dyn Backend,
    gt: Option<&GroundTruth>,
) -> Result<(FactorEstimate, ConvergenceTrace), SolverError> {
    let start = Instant::now();
    let sketches = backend.sketches();
    cfg.validate_for(sketches, gt)?;
    let (m, q, n, mode) = (sketches.m, sketches.q, sketches.n, sketches.mode);
    let r = cfg.rank;
    let c_tilde = cfg.resolve_c_tilde(gt)?;

    let sum_sq = backend.sum_of_squares().map_err(|e| e.at(0))?;
    let alpha = alpha_from_sum(sum_sq, m, q, c_tilde);
    let x0 = backend.init_matrix(alpha).map_err(|e| e.at(0))?;
    let (mut u, sigma_1) = top_r_with_leading_value(&x0, r).map_err(|e| SolverError::from(e).at(0))?;

    let sigma_max = match cfg.sigma_max_mode {
        SigmaMaxMode::Oracle(s) => s,
        SigmaMaxMode::EstimateFromInit => sigma_1 / SIGMA_ESTIMATE_SHRINKAGE,
    };
    if !(sigma_max > 0.0 && sigma_max.is_finite()) {
        return Err(SolverError::Config {
            field: "sigma_max_mode",
            message: format!("σ̂_max = {sigma_max} is unusable (all truncated measurements vanish?)"),
        });
    }
    let step = cfg.c_eta / (m as f64 * sigma_max * sigma_max);

    backend.broadcast(0, &u);
    let mut b = backend.min_step(&u, ls_label(mode, 1)).map_err(|e| e.at(0))?;

    let mut trace = ConvergenceTrace {
        records: Vec::with_capacity(cfg.iterations + 1),
        alpha,
        sigma_max_used: sigma_max,
        step,
        stopped_early: false,
    };
    let record = |iter: usize, u: &OrthonormalBasis, b: &Matrix, step_se2: Option<f64>, comm: u64| {
        let metrics = gt.map(|gt| measure(gt, u, b));
        IterationRecord {
            iter,
            se2: metrics.as_ref().map(|m| m.se2),
            se_f: metrics.as_ref().map(|m| m.se_f),
            max_rel_col_err: metrics.as_ref().map(|m| m.max_rel_col_err),
            rel_fro_err: metrics.as_ref().map(|m| m.rel_fro_err),
            step_se2,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            comm_scalars: comm,
        }
    };
    trace.records.push(record(0, &u, &b, None, 0));

    let per_node_upload = (n * r) as u64;
    for t in 1..=cfg.iterations {
        let grad = backend.gradient(&u, &b, gd_label(mode, t)).map_err(|e| e.at(t))?;
        let next = gd_step(&u, &grad, step).map_err(|e| e.at(t))?;
        backend.broadcast(t, &next);
        b = backend
            .min_step(&next, ls_label(mode, (t + 1).min(cfg.iterations)))
            .map_err(|e| e.at(t))?;
        let moved = subspace_distance_2(&u, &next).map_err(|e| SolverError::from(e).at(t))?;
        u = next;
        trace.records.push(record(t, &u, &b, Some(moved), per_node_upload));
        if let Some(tol) = cfg.stop_tol {
            if moved < tol && t < cfg.iterations {
                trace.stopped_early = true;
                break;
            }
        }
    }

    Ok((FactorEstimate { u, b }, trace))
}

/// Runs AltGDmin on one machine. Metrics in the trace are filled only when
/// the planted instance is supplied.
pub fn run_altgdmin(
    cfg: &SolverConfig,
    sketches: &SketchSet,
    gt: Option<&GroundTruth>,
) -> Result<(FactorEstimate, ConvergenceTrace), SolverError> {
    let mut backend = CentralBackend {
        sketches,
        cache: ProductCache::default(),
    };
    drive(cfg, &mut backend, gt)
}
