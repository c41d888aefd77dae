use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{contraction_bound, contraction_ratios, log_linear_r2, median};
use super::BenchError;
use crate::federation::{partition_columns, run_federated_altgdmin, FederationError, PartitionPolicy};
use crate::model::{generate_ground_truth, sketch, GroundTruth, SeedSpec, SketchSet, SplitMode};
use crate::solver::{run_altgdmin, ConvergenceTrace, SigmaMaxMode, SolverConfig};

/// Largest number of sketch entries a single trial may allocate (2 GiB).
pub const MAX_SKETCH_ELEMENTS: u128 = 1 << 28;

/// Slack added to the contraction bound `1 − 0.6 c_η/κ²` when counting hits.
pub const CONTRACTION_SLACK: f64 = 0.1;

pub const CELLS_CSV_HEADER: &str = "cell,n,q,r,kappa,m,trials,successes,success_fraction,median_final_se2,\
median_contraction,contraction_hit_rate,median_r2,median_init_se2,errors,error_kind,mean_wall_ms,max_wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaChoice {
    #[default]
    Oracle,
    Estimate,
}

/// Solver settings shared by every cell; the rank comes from the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverTemplate {
    pub iterations: usize,
    pub c_eta: f64,
    pub c_tilde: Option<f64>,
    pub sigma_max_mode: SigmaChoice,
    pub split: bool,
    pub stop_tol: Option<f64>,
}

impl Default for SolverTemplate {
    fn default() -> Self {
        Self {
            iterations: 400,
            c_eta: 0.4,
            c_tilde: None,
            sigma_max_mode: SigmaChoice::Oracle,
            split: false,
            stop_tol: None,
        }
    }
}

impl SolverTemplate {
    pub fn config(&self, r: usize, gt: &GroundTruth) -> SolverConfig {
        let mut cfg = SolverConfig::new(r, self.iterations);
        cfg.c_eta = self.c_eta;
        cfg.c_tilde = self.c_tilde;
        cfg.split = self.split;
        cfg.stop_tol = self.stop_tol;
        cfg.sigma_max_mode = match self.sigma_max_mode {
            SigmaChoice::Oracle => SigmaMaxMode::Oracle(gt.sigma_max()),
            SigmaChoice::Estimate => SigmaMaxMode::EstimateFromInit,
        };
        cfg
    }

    fn split_mode(&self) -> SplitMode {
        if self.split {
            SplitMode::Split {
                iterations: self.iterations,
            }
        } else {
            SplitMode::Shared
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationTemplate {
    pub nodes: usize,
    #[serde(default = "default_policy")]
    pub policy: PartitionPolicy,
}

fn default_policy() -> PartitionPolicy {
    PartitionPolicy::Contiguous
}

/// A sweep over instance sizes and measurement counts, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub n: Vec<usize>,
    pub q: Vec<usize>,
    pub r: Vec<usize>,
    pub kappa: Vec<f64>,
    pub m: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Success threshold on the final `SE₂(U_T, U⋆)`.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverTemplate,
    #[serde(default)]
    pub federation: Option<FederationTemplate>,
    /// Directory for `cells.csv` and `traces/`; nothing is written when unset.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Include wall-clock columns in the CSV outputs.
    #[serde(default)]
    pub timing: bool,
}

fn default_trials() -> usize {
    20
}

fn default_eps() -> f64 {
    1e-6
}

impl ExperimentGrid {
    /// A grid with one value per axis and default settings.
    pub fn single(n: usize, q: usize, r: usize, kappa: f64, m: usize) -> Self {
        Self {
            n: vec![n],
            q: vec![q],
            r: vec![r],
            kappa: vec![kappa],
            m: vec![m],
            trials: default_trials(),
            eps: default_eps(),
            seed: 0,
            solver: SolverTemplate::default(),
            federation: None,
            output: None,
            timing: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let grid: Self = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |field: &'static str, message: &str| {
            Err(BenchError::InvalidGrid {
                field,
                message: message.to_string(),
            })
        };
        for (field, empty) in [
            ("n", self.n.is_empty()),
            ("q", self.q.is_empty()),
            ("r", self.r.is_empty()),
            ("kappa", self.kappa.is_empty()),
            ("m", self.m.is_empty()),
        ] {
            if empty {
                return bad(field, "must list at least one value");
            }
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if !(self.eps > 0.0) {
            return bad("eps", "must be positive");
        }
        if self.solver.iterations == 0 {
            return bad("iterations", "must be at least 1");
        }
        if !(self.solver.c_eta > 0.0 && self.solver.c_eta <= 0.5) {
            return bad("c_eta", "must lie in (0, 0.5]");
        }
        if matches!(&self.federation, Some(f) if f.nodes == 0) {
            return bad("nodes", "must be at least 1");
        }
        Ok(())
    }

    /// Grid coordinates in output order: `m` varies fastest, then `κ`, `r`,
    /// `q` and `n`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &q in &self.q {
                for &r in &self.r {
                    for &kappa in &self.kappa {
                        for &m in &self.m {
                            out.push(Cell { n, q, r, kappa, m });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub kappa: f64,
    pub m: usize,
}

impl Cell {
    /// Directory-safe name, e.g. `n100_q200_r2_k2_m60`.
    pub fn name(&self) -> String {
        format!("n{}_q{}_r{}_k{}_m{}", self.n, self.q, self.r, self.kappa, self.m)
    }

    fn instance_tag(&self) -> String {
        format!("n{}/q{}/r{}/k{}", self.n, self.q, self.r, self.kappa)
    }
}

/// Seeds of trial `trial` in `cell`: one for the planted instance and one
/// for the sketches. Neither depends on `m`, so cells that differ only in
/// `m` share instances and their sketches are row prefixes of each other.
pub fn trial_seeds(grid_seed: u64, cell: &Cell, trial: usize) -> (SeedSpec, SeedSpec) {
    let root = SeedSpec::new(grid_seed);
    let tag = cell.instance_tag();
    (
        root.derive(&format!("truth/{tag}"), trial as u64),
        root.derive(&format!("sketch/{tag}"), trial as u64),
    )
}

/// The instance and sketches trial `trial` of `cell` runs on.
pub fn trial_instance(grid: &ExperimentGrid, cell: &Cell, trial: usize) -> Result<(GroundTruth, SketchSet), String> {
    let (truth_seed, sketch_seed) = trial_seeds(grid.seed, cell, trial);
    let gt = generate_ground_truth(cell.n, cell.q, cell.r, cell.kappa, &truth_seed).map_err(|e| e.to_string())?;
    let sk = sketch(&gt, cell.m, grid.solver.split_mode(), &sketch_seed).map_err(|e| e.to_string())?;
    Ok((gt, sk))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub mu: Option<f64>,
    pub init_se2: Option<f64>,
    pub final_se2: Option<f64>,
    pub final_max_rel_col_err: Option<f64>,
    pub iterations: usize,
    pub success: bool,
    pub contraction_median: Option<f64>,
    pub contraction_hits: usize,
    pub contraction_count: usize,
    pub r2: Option<f64>,
    pub wall_ms: f64,
    pub error_kind: Option<String>,
    pub error: Option<String>,
    #[serde(skip)]
    pub contraction_ratios: Vec<f64>,
    #[serde(skip)]
    pub trace: Option<ConvergenceTrace>,
}

impl TrialResult {
    fn failed(trial: usize, mu: Option<f64>, kind: &str, message: String, wall_ms: f64) -> Self {
        Self {
            trial,
            mu,
            init_se2: None,
            final_se2: None,
            final_max_rel_col_err: None,
            iterations: 0,
            success: false,
            contraction_median: None,
            contraction_hits: 0,
            contraction_count: 0,
            r2: None,
            wall_ms,
            error_kind: Some(kind.to_string()),
            error: Some(message),
            contraction_ratios: Vec::new(),
            trace: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub trials: usize,
    pub successes: usize,
    pub success_fraction: f64,
    pub median_final_se2: Option<f64>,
    /// Median over trials of each trial's median contraction ratio.
    pub median_contraction: Option<f64>,
    /// Fraction of in-regime ratios at or below `1 − 0.6 c_η/κ² + 0.1`.
    pub contraction_hit_rate: Option<f64>,
    pub median_r2: Option<f64>,
    pub median_init_se2: Option<f64>,
    pub errors: usize,
    /// Kind of the first failed trial.
    pub error_kind: Option<String>,
    pub mean_wall_ms: f64,
    pub max_wall_ms: f64,
    pub trial_results: Vec<TrialResult>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl CellResult {
    pub fn csv_row(&self, index: usize, timing: bool) -> String {
        let c = &self.cell;
        let (mean, max) = if timing {
            (format!("{:.3}", self.mean_wall_ms), format!("{:.3}", self.max_wall_ms))
        } else {
            (String::new(), String::new())
        };
        format!(
            "{index},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{mean},{max}",
            c.n,
            c.q,
            c.r,
            c.kappa,
            c.m,
            self.trials,
            self.successes,
            self.success_fraction,
            fmt_opt(self.median_final_se2),
            fmt_opt(self.median_contraction),
            fmt_opt(self.contraction_hit_rate),
            fmt_opt(self.median_r2),
            fmt_opt(self.median_init_se2),
            self.errors,
            self.error_kind.as_deref().unwrap_or(""),
        )
    }
}

fn federation_kind(e: &FederationError) -> &'static str {
    match e {
        FederationError::Solver(s) => s.kind(),
        FederationError::TooManyNodes { .. } => "TooManyNodes",
        FederationError::AssignmentMismatch(_) => "AssignmentMismatch",
    }
}

fn run_trial(grid: &ExperimentGrid, cell: &Cell, trial: usize) -> TrialResult {
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64() * 1e3;
    let phases = if grid.solver.split { 2 * grid.solver.iterations as u128 + 2 } else { 1 };
    let elements = phases * (cell.q * cell.m) as u128 * cell.n as u128;
    if elements > MAX_SKETCH_ELEMENTS {
        return TrialResult::failed(
            trial,
            None,
            "ResourceLimit",
            format!("{elements} sketch entries exceed the limit of {MAX_SKETCH_ELEMENTS}"),
            elapsed(),
        );
    }
    let (gt, sk) = match trial_instance(grid, cell, trial) {
        Ok(v) => v,
        Err(e) => return TrialResult::failed(trial, None, "Instance", e, elapsed()),
    };
    let cfg = grid.solver.config(cell.r, &gt);
    let outcome = match &grid.federation {
        None => run_altgdmin(&cfg, &sk, Some(&gt)).map_err(|e| (e.kind(), e.to_string())),
        Some(fed) => partition_columns(cell.q, fed.nodes, fed.policy)
            .and_then(|a| run_federated_altgdmin(&cfg, &sk, &a, Some(&gt)))
            .map(|(est, trace, _)| (est, trace))
            .map_err(|e| (federation_kind(&e), e.to_string())),
    };
    let trace = match outcome {
        Ok((_, trace)) => trace,
        Err((kind, message)) => return TrialResult::failed(trial, Some(gt.mu), kind, message, elapsed()),
    };
    let ratios = contraction_ratios(&trace, cell.r, cell.kappa);
    let bound = contraction_bound(grid.solver.c_eta, cell.kappa, CONTRACTION_SLACK);
    let last = trace.last().expect("trace has an initialization record");
    let final_se2 = last.se2;
    TrialResult {
        trial,
        mu: Some(gt.mu),
        init_se2: trace.records[0].se2,
        final_se2,
        final_max_rel_col_err: last.max_rel_col_err,
        iterations: trace.iterations(),
        success: final_se2.is_some_and(|s| s <= grid.eps),
        contraction_median: median(&ratios),
        contraction_hits: ratios.iter().filter(|&&x| x <= bound).count(),
        contraction_count: ratios.len(),
        r2: log_linear_r2(&trace, cell.r, cell.kappa),
        wall_ms: elapsed(),
        error_kind: None,
        error: None,
        contraction_ratios: ratios,
        trace: Some(trace),
    }
}

/// Runs every trial of one cell.
pub fn run_cell(grid: &ExperimentGrid, cell: &Cell) -> CellResult {
    let results: Vec<TrialResult> = (0..grid.trials)
        .into_par_iter()
        .map(|t| run_trial(grid, cell, t))
        .collect();
    let successes = results.iter().filter(|t| t.success).count();
    let collect = |f: fn(&TrialResult) -> Option<f64>| results.iter().filter_map(f).collect::<Vec<f64>>();
    let hits: usize = results.iter().map(|t| t.contraction_hits).sum();
    let count: usize = results.iter().map(|t| t.contraction_count).sum();
    let walls: Vec<f64> = results.iter().map(|t| t.wall_ms).collect();
    CellResult {
        cell: *cell,
        trials: results.len(),
        successes,
        success_fraction: successes as f64 / results.len() as f64,
        median_final_se2: median(&collect(|t| t.final_se2)),
        median_contraction: median(&collect(|t| t.contraction_median)),
        contraction_hit_rate: (count > 0).then(|| hits as f64 / count as f64),
        median_r2: median(&collect(|t| t.r2)),
        median_init_se2: median(&collect(|t| t.init_se2)),
        errors: results.iter().filter(|t| t.error_kind.is_some()).count(),
        error_kind: results.iter().find_map(|t| t.error_kind.clone()),
        mean_wall_ms: walls.iter().sum::<f64>() / walls.len() as f64,
        max_wall_ms: walls.iter().copied().fold(0.0, f64::max),
        trial_results: results,
    }
}

fn write_traces(dir: &Path, cell: &CellResult, timing: bool) -> Result<(), BenchError> {
    let cell_dir = dir.join("traces").join(cell.cell.name());
    fs::create_dir_all(&cell_dir)?;
    for t in &cell.trial_results {
        if let Some(trace) = &t.trace {
            let mut w = BufWriter::new(File::create(cell_dir.join(format!("{}.csv", t.trial)))?);
            trace.write_csv(&mut w, timing)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Runs every cell in order. When the grid names an output directory,
/// each cell's row is appended to `cells.csv` as soon as it completes and
/// its traces go to `traces/<cell>/<trial>.csv`. Solver failures are
/// recorded per trial and never abort the sweep.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<CellResult>, BenchError> {
    grid.validate()?;
    let mut csv = match &grid.output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut w = BufWriter::new(File::create(dir.join("cells.csv"))?);
            writeln!(w, "{CELLS_CSV_HEADER}")?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut out = Vec::new();
    for (i, cell) in grid.cells().iter().enumerate() {
        let result = run_cell(grid, cell);
        if let (Some(w), Some(dir)) = (csv.as_mut(), grid.output.as_ref()) {
            writeln!(w, "{}", result.csv_row(i, grid.timing))?;
            w.flush()?;
            write_traces(dir, &result, grid.timing)?;
        }
        out.push(result);
    }
    Ok(out)
}
