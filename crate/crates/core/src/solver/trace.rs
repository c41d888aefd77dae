use std::io::Write;

use crate::linalg::{subspace_distance_2, subspace_distance_f, Matrix, OrthonormalBasis};
use crate::model::GroundTruth;

pub const TRACE_CSV_HEADER: &str = "iter,se2,seF,max_rel_col_err,rel_fro_err,elapsed_ms,comm_scalars";

/// Metrics after one iteration (record 0 is the initialization).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `SE₂(U_t, U⋆)`; `None` without ground truth.
    pub se2: Option<f64>,
    pub se_f: Option<f64>,
    /// `max_k ‖x_k − x⋆_k‖ / ‖x⋆_k‖` over columns with `x⋆_k ≠ 0`.
    pub max_rel_col_err: Option<f64>,
    /// `‖X − X⋆‖_F / ‖X⋆‖_F`.
    pub rel_fro_err: Option<f64>,
    /// `SE₂(U_t, U_{t−1})`, the ground-truth-free stopping statistic.
    pub step_se2: Option<f64>,
    /// Wall time since the start of the run.
    pub elapsed_ms: f64,
    /// Real scalars each node uploads in this iteration.
    pub comm_scalars: u64,
}

impl IterationRecord {
    /// Equality of everything except wall time.
    pub fn same_metrics(&self, other: &Self) -> bool {
        fn bits(v: Option<f64>) -> Option<u64> {
            v.map(f64::to_bits)
        }
        self.iter == other.iter
            && bits(self.se2) == bits(other.se2)
            && bits(self.se_f) == bits(other.se_f)
            && bits(self.max_rel_col_err) == bits(other.max_rel_col_err)
            && bits(self.rel_fro_err) == bits(other.rel_fro_err)
            && bits(self.step_se2) == bits(other.step_se2)
            && self.comm_scalars == other.comm_scalars
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    /// Truncation threshold used by the initialization.
    pub alpha: f64,
    /// `σ̂_max` used in the step size.
    pub sigma_max_used: f64,
    /// Multiplier on the raw gradient, `c_η / (m σ̂_max²)`.
    pub step: f64,
    pub stopped_early: bool,
}

impl ConvergenceTrace {
    /// Completed GDmin iterations.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_se2(&self) -> Option<f64> {
        self.last().and_then(|r| r.se2)
    }

    pub fn se2_series(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.se2).collect()
    }

    /// Equality of everything except wall time.
    pub fn same_metrics(&self, other: &Self) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.same_metrics(b))
            && self.alpha.to_bits() == other.alpha.to_bits()
            && self.sigma_max_used.to_bits() == other.sigma_max_used.to_bits()
            && self.step.to_bits() == other.step.to_bits()
            && self.stopped_early == other.stopped_early
    }

    /// Writes the trace as CSV under [`TRACE_CSV_HEADER`]. Floats use the
    /// shortest representation that round-trips; unavailable metrics are
    /// empty fields. `elapsed_ms` is left empty unless `timing` is set, which
    /// keeps the file a deterministic function of the inputs.
    pub fn write_csv(&self, w: &mut impl Write, timing: bool) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for rec in &self.records {
            let elapsed = if timing {
                format!("{:.3}", rec.elapsed_ms)
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                rec.iter,
                fmt_opt(rec.se2),
                fmt_opt(rec.se_f),
                fmt_opt(rec.max_rel_col_err),
                fmt_opt(rec.rel_fro_err),
                elapsed,
                rec.comm_scalars
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, timing: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:e}"),
        None => String::new(),
    }
}

pub(crate) struct Metrics {
    pub se2: f64,
    pub se_f: f64,
    pub max_rel_col_err: f64,
    pub rel_fro_err: f64,
}

pub(crate) fn measure(gt: &GroundTruth, u: &OrthonormalBasis, b: &Matrix) -> Metrics {
    let se2 = subspace_distance_2(u, &gt.u_star).unwrap_or(f64::NAN);
    let se_f = subspace_distance_f(u, &gt.u_star).unwrap_or(f64::NAN);
    let x = u.matrix() * b;
    let mut max_rel_col_err = 0.0_f64;
    for (k, col) in gt.x_star.column_iter().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            let err = (x.column(k) - col).norm() / norm;
            max_rel_col_err = if err.is_nan() { f64::NAN } else { max_rel_col_err.max(err) };
        }
    }
    let rel_fro_err = (&x - &gt.x_star).norm() / gt.x_star.norm();
    Metrics {
        se2,
        se_f,
        max_rel_col_err,
        rel_fro_err,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let trace = ConvergenceTrace {
            records: vec![
                IterationRecord {
                    iter: 0,
                    se2: Some(0.25),
                    se_f: Some(0.3),
                    max_rel_col_err: Some(1e-3),
                    rel_fro_err: Some(2.5e-4),
                    step_se2: None,
                    elapsed_ms: 1.5,
                    comm_scalars: 0,
                },
                IterationRecord {
                    iter: 1,
                    se2: None,
                    se_f: None,
                    max_rel_col_err: None,
                    rel_fro_err: None,
                    step_se2: Some(0.1),
                    elapsed_ms: 2.25,
                    comm_scalars: 200,
                },
            ],
            ..Default::default()
        };
        assert_eq!(
            trace.to_csv_string(false),
            "iter,se2,seF,max_rel_col_err,rel_fro_err,elapsed_ms,comm_scalars\n\
             0,2.5e-1,3e-1,1e-3,2.5e-4,,0\n\
             1,,,,,,200\n"
        );
        assert!(trace.to_csv_string(true).contains(",2.250,200\n"));
        assert_eq!(trace.iterations(), 1);
    }
}
