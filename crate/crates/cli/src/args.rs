use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "lrcs", version, about = "Low-rank column-wise compressive sensing with AltGDmin")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted instance and its sketches.
    Gen(InstanceCmd),
    /// Run the centralized solver.
    Solve(InstanceCmd),
    /// Run the solver with columns spread over nodes.
    Federate(InstanceCmd),
    /// Run a Monte-Carlo grid described by a JSON file.
    Bench(BenchCmd),
    /// Check the gradient against finite differences and its expectation.
    GradCheck(SuiteCmd),
    /// Measure how often the per-iteration bounds hold.
    LemmaCheck(SuiteCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaFlag {
    /// Planted largest singular value.
    Oracle,
    /// Leading singular value of the initialization matrix divided by 0.92.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyFlag {
    /// Contiguous column blocks.
    Contig,
    /// Column k goes to node k mod N.
    Rr,
}

/// Every field is optional so a JSON config can fill the gaps; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Rows of X⋆ (signal dimension) [default: 100]
    #[arg(long)]
    pub n: Option<usize>,
    /// Columns of X⋆ (number of signals) [default: 200]
    #[arg(long)]
    pub q: Option<usize>,
    /// Rank of X⋆ and of the estimated basis [default: 2, or the instance rank]
    #[arg(long)]
    pub r: Option<usize>,
    /// Condition number σ⋆_max/σ⋆_min, dimensionless, ≥ 1 [default: 2]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Measurements per column and per measurement set [default: 60]
    #[arg(long)]
    pub m: Option<usize>,
    /// Iteration budget T [default: 400]
    #[arg(long)]
    pub t_iters: Option<usize>,
    /// Step-size constant, in (0, 0.5]; step = c_eta/(m σ̂²) [default: 0.4]
    #[arg(long)]
    pub c_eta: Option<f64>,
    /// Truncation constant, dimensionless [default: 9 κ² μ² of the instance]
    #[arg(long)]
    pub c_tilde: Option<f64>,
    /// Source of σ̂_max in the step size [default: oracle]
    #[arg(long, value_enum)]
    pub sigma_max_mode: Option<SigmaFlag>,
    /// Fresh measurements for every phase (2T+2 sets) instead of one shared set [default: off]
    #[arg(long, value_enum)]
    pub split: Option<Switch>,
    /// Stop once SE₂ between successive iterates falls below this [default: run all T]
    #[arg(long)]
    pub stop_tol: Option<f64>,
    /// Number of federated nodes, 1 ≤ nodes ≤ q [default: 4]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Column-to-node assignment [default: contig]
    #[arg(long, value_enum)]
    pub policy: Option<PolicyFlag>,
    /// Master seed; all randomness derives from it [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Success threshold on the final SE₂, dimensionless [default: 1e-6]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Directory written by `gen`, read instead of generating [default: none]
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Output directory, created if missing [default: lrcs-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Settings {
    /// Fills every unset field from `other`.
    pub fn or(self, other: Settings) -> Settings {
        Settings {
            n: self.n.or(other.n),
            q: self.q.or(other.q),
            r: self.r.or(other.r),
            kappa: self.kappa.or(other.kappa),
            m: self.m.or(other.m),
            t_iters: self.t_iters.or(other.t_iters),
            c_eta: self.c_eta.or(other.c_eta),
            c_tilde: self.c_tilde.or(other.c_tilde),
            sigma_max_mode: self.sigma_max_mode.or(other.sigma_max_mode),
            split: self.split.or(other.split),
            stop_tol: self.stop_tol.or(other.stop_tol),
            nodes: self.nodes.or(other.nodes),
            policy: self.policy.or(other.policy),
            seed: self.seed.or(other.seed),
            eps: self.eps.or(other.eps),
            instance: self.instance.or(other.instance),
            out: self.out.or(other.out),
        }
    }
}

#[derive(Debug, Args)]
pub struct InstanceCmd {
    #[command(flatten)]
    pub settings: Settings,
    /// JSON file with any of the flag names above (underscored) as keys [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record wall-clock time in trace.csv (makes the file non-reproducible) [default: off]
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    /// Grid JSON file (axes n, q, r, kappa, m plus optional trials, eps, seed, solver, federation)
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the grid seed [default: the grid's, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the grid success threshold on the final SE₂ [default: the grid's, else 1e-6]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output directory for cells.csv and traces/ [default: the grid's, else lrcs-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add wall-clock columns (milliseconds) to cells.csv and the traces [default: off]
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SuiteCmd {
    /// JSON file with suite parameters; missing keys take their defaults [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for report.json [default: lrcs-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
}
