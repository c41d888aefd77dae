use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;

use lrcs::bench::{
    gradient_oracle_suite, lemma_event_suite, run_grid, BenchError, ExperimentGrid, GradientSuiteParams,
    LemmaSuiteParams, MAX_SKETCH_ELEMENTS,
};
use lrcs::federation::{partition_columns, run_federated_altgdmin, FederationError, PartitionPolicy};
use lrcs::model::{
    generate_ground_truth, read_ground_truth, read_sketch_set, sketch, write_ground_truth, write_sketch_set,
    GroundTruth, ModelError, SeedSpec, SketchSet, SplitMode,
};
use lrcs::solver::{SigmaMaxMode, SolverConfig, SolverError};

use crate::args::{BenchCmd, InstanceCmd, PolicyFlag, Settings, SigmaFlag, SuiteCmd, Switch};

const TRUTH_FILE: &str = "truth.bin";
const SKETCH_FILE: &str = "sketches.bin";

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit code 1.
    Validation(String),
    /// Failure while running; exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn field(field: &str, message: impl fmt::Display) -> Self {
        CliError::Validation(format!("invalid {field}: {message}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::BadRank { .. } => CliError::field("r", e),
            ModelError::BadKappa(_) => CliError::field("kappa", e),
            ModelError::NoMeasurements => CliError::field("m", e),
            ModelError::Format(_) => CliError::field("instance", e),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<FederationError> for CliError {
    fn from(e: FederationError) -> Self {
        match e {
            FederationError::Solver(s) => s.into(),
            FederationError::TooManyNodes { .. } => CliError::field("nodes", e),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io(_) => CliError::Runtime(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::field("config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::field("config", format!("{}: {e}", path.display())))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn default_out() -> PathBuf {
    PathBuf::from("lrcs-out")
}

/// Flags merged over the optional JSON config.
fn settings(cmd: &InstanceCmd) -> Result<Settings, CliError> {
    let file = match &cmd.config {
        Some(p) => read_json::<Settings>(p)?,
        None => Settings::default(),
    };
    Ok(cmd.settings.clone().or(file))
}

struct Instance {
    gt: Option<GroundTruth>,
    sketches: SketchSet,
}

fn sketch_seed(seed: u64) -> SeedSpec {
    SeedSpec::new(seed).derive("sketch", 0)
}

fn split_mode(s: &Settings) -> SplitMode {
    match s.split {
        Some(Switch::On) => SplitMode::Split {
            iterations: s.t_iters.unwrap_or(400),
        },
        _ => SplitMode::Shared,
    }
}

fn generate(s: &Settings) -> Result<Instance, CliError> {
    let (n, q, r) = (s.n.unwrap_or(100), s.q.unwrap_or(200), s.r.unwrap_or(2));
    let m = s.m.unwrap_or(60);
    if m < r {
        return Err(SolverError::Underdetermined { m, r }.into());
    }
    let mode = split_mode(s);
    let sets = match mode {
        SplitMode::Shared => 1,
        SplitMode::Split { iterations } => 2 * iterations as u128 + 2,
    };
    if sets * (n as u128) * (q as u128) * (m as u128) > MAX_SKETCH_ELEMENTS {
        return Err(CliError::field(
            "m",
            format!("{sets} sets of {q} x {m} x {n} sketch entries exceed the limit of {MAX_SKETCH_ELEMENTS}"),
        ));
    }
    let seed = s.seed.unwrap_or(0);
    let gt = generate_ground_truth(n, q, r, s.kappa.unwrap_or(2.0), &SeedSpec::new(seed))?;
    let sketches = sketch(&gt, m, mode, &sketch_seed(seed))?;
    Ok(Instance { gt: Some(gt), sketches })
}

fn load(dir: &Path, s: &Settings) -> Result<Instance, CliError> {
    for (field, set) in [
        ("n", s.n.is_some()),
        ("q", s.q.is_some()),
        ("kappa", s.kappa.is_some()),
        ("m", s.m.is_some()),
        ("seed", s.seed.is_some()),
    ] {
        if set {
            return Err(CliError::field(field, "cannot be combined with --instance"));
        }
    }
    let open = |name: &str| {
        let path = dir.join(name);
        File::open(&path).map(BufReader::new).map_err(|e| CliError::field("instance", format!("{}: {e}", path.display())))
    };
    let sketches = read_sketch_set(&mut open(SKETCH_FILE)?)?;
    let gt = if dir.join(TRUTH_FILE).exists() {
        Some(read_ground_truth(&mut open(TRUTH_FILE)?)?)
    } else {
        None
    };
    Ok(Instance { gt, sketches })
}

fn instance(s: &Settings) -> Result<Instance, CliError> {
    match &s.instance {
        Some(dir) => load(dir, s),
        None => generate(s),
    }
}

fn solver_config(s: &Settings, inst: &Instance) -> Result<SolverConfig, CliError> {
    let rank = s.r.or(inst.gt.as_ref().map(|g| g.r)).unwrap_or(2);
    let mut cfg = SolverConfig::new(rank, s.t_iters.unwrap_or(400));
    cfg.c_eta = s.c_eta.unwrap_or(cfg.c_eta);
    cfg.c_tilde = s.c_tilde;
    cfg.stop_tol = s.stop_tol;
    cfg.split = match s.split {
        Some(sw) => sw == Switch::On,
        None => inst.sketches.is_split(),
    };
    cfg.sigma_max_mode = match (s.sigma_max_mode.unwrap_or(SigmaFlag::Oracle), &inst.gt) {
        (SigmaFlag::Oracle, Some(gt)) => SigmaMaxMode::Oracle(gt.sigma_max()),
        (SigmaFlag::Oracle, None) => {
            return Err(CliError::field("sigma_max_mode", "oracle needs the ground truth; use estimate"))
        }
        (SigmaFlag::Estimate, _) => SigmaMaxMode::EstimateFromInit,
    };
    if let Some(eps) = s.eps {
        if eps.is_nan() || eps <= 0.0 {
            return Err(CliError::field("eps", format!("must be positive, got {eps}")));
        }
    }
    Ok(cfg)
}

pub fn gen(cmd: InstanceCmd) -> Result<(), CliError> {
    let s = settings(&cmd)?;
    if s.instance.is_some() {
        return Err(CliError::field("instance", "gen writes an instance; it cannot read one"));
    }
    let inst = generate(&s)?;
    let gt = inst.gt.as_ref().expect("generated instances carry their ground truth");
    let out = s.out.clone().unwrap_or_else(default_out);
    create_out(&out)?;
    write_file(&out.join(TRUTH_FILE), |w| write_ground_truth(w, gt).map_err(to_io))?;
    write_file(&out.join(SKETCH_FILE), |w| write_sketch_set(w, &inst.sketches).map_err(to_io))?;
    let summary = serde_json::to_string_pretty(&gt.summary()).expect("summary serializes");
    write_file(&out.join("truth.json"), |w| writeln!(w, "{summary}"))?;
    println!(
        "wrote {} (n={} q={} r={} m={} kappa={} mu={:.4} sets={})",
        out.display(),
        gt.n,
        gt.q,
        gt.r,
        inst.sketches.m,
        gt.kappa,
        gt.mu,
        inst.sketches.phases.len()
    );
    Ok(())
}

fn to_io(e: ModelError) -> std::io::Error {
    match e {
        ModelError::Io(e) => e,
        e => std::io::Error::other(e.to_string()),
    }
}

fn policy(flag: PolicyFlag) -> PartitionPolicy {
    match flag {
        PolicyFlag::Contig => PartitionPolicy::Contiguous,
        PolicyFlag::Rr => PartitionPolicy::RoundRobin,
    }
}

pub fn solve(cmd: InstanceCmd, federated: bool) -> Result<(), CliError> {
    let s = settings(&cmd)?;
    if !federated {
        if s.nodes.is_some() {
            return Err(CliError::field("nodes", "only federate accepts --nodes"));
        }
        if s.policy.is_some() {
            return Err(CliError::field("policy", "only federate accepts --policy"));
        }
    }
    let inst = instance(&s)?;
    let cfg = solver_config(&s, &inst)?;
    let gt = inst.gt.as_ref();
    let assignment = if federated {
        Some(partition_columns(
            inst.sketches.q,
            s.nodes.unwrap_or(4),
            policy(s.policy.unwrap_or(PolicyFlag::Contig)),
        )?)
    } else {
        None
    };

    let start = Instant::now();
    let (estimate, trace, ledger) = match &assignment {
        Some(a) => {
            let (e, t, l) = run_federated_altgdmin(&cfg, &inst.sketches, a, gt)?;
            (e, t, Some(l))
        }
        None => {
            let (e, t) = lrcs::solver::run_altgdmin(&cfg, &inst.sketches, gt)?;
            (e, t, None)
        }
    };
    let wall = start.elapsed().as_secs_f64();

    let out = s.out.clone().unwrap_or_else(default_out);
    create_out(&out)?;
    write_file(&out.join("trace.csv"), |w| trace.write_csv(w, cmd.timing))?;
    write_file(&out.join("factors.bin"), |w| estimate.write_to(w).map_err(to_io))?;
    if let Some(l) = &ledger {
        write_file(&out.join("ledger.csv"), |w| l.write_csv(w))?;
    }

    let eps = s.eps.unwrap_or(1e-6);
    let se2 = match trace.final_se2() {
        Some(v) => format!("final SE2 {v:.3e} ({})", if v <= eps { "success" } else { "above eps" }),
        None => "final SE2 n/a".to_string(),
    };
    let nodes = assignment.map(|a| format!(", {} nodes", a.node_count())).unwrap_or_default();
    println!("{se2}, {} iterations{nodes}, wall {wall:.3} s", trace.iterations());
    Ok(())
}

pub fn bench(cmd: BenchCmd) -> Result<(), CliError> {
    let mut grid = ExperimentGrid::load(&cmd.config).map_err(|e| match e {
        BenchError::Io(io) => CliError::field("config", format!("{}: {io}", cmd.config.display())),
        e => e.into(),
    })?;
    if let Some(seed) = cmd.seed {
        grid.seed = seed;
    }
    if let Some(eps) = cmd.eps {
        grid.eps = eps;
    }
    grid.output = cmd.out.or(grid.output).or_else(|| Some(default_out()));
    grid.timing |= cmd.timing;
    let start = Instant::now();
    let cells = run_grid(&grid)?;
    let trials: usize = cells.iter().map(|c| c.trials).sum();
    let successes: usize = cells.iter().map(|c| c.successes).sum();
    println!(
        "{} cells, {successes}/{trials} successful trials, wrote {}, wall {:.3} s",
        cells.len(),
        grid.output.as_ref().expect("set above").display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn suite_params<T: DeserializeOwned + Default>(cmd: &SuiteCmd) -> Result<T, CliError> {
    match &cmd.config {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

/// Writes `report` without its wall-clock fields, so reruns give equal bytes.
fn write_report(out: &Path, report: &impl serde::Serialize) -> Result<(), CliError> {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                map.remove("runtime_ms");
                map.values_mut().for_each(strip);
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut value = serde_json::to_value(report).map_err(|e| CliError::Runtime(e.to_string()))?;
    strip(&mut value);
    create_out(out)?;
    let text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("report.json"), |w| writeln!(w, "{text}"))
}

pub fn grad_check(cmd: SuiteCmd) -> Result<(), CliError> {
    let mut params: GradientSuiteParams = suite_params(&cmd)?;
    if let Some(seed) = cmd.seed {
        params.seeds = vec![seed];
    }
    if params.sizes.is_empty() || params.seeds.is_empty() {
        return Err(CliError::field("sizes", "need at least one size and one seed"));
    }
    let report = gradient_oracle_suite(&params);
    write_report(&cmd.out.clone().unwrap_or_else(default_out), &report)?;
    let failed = report.cases.iter().filter(|c| c.error.is_some()).count();
    println!(
        "{} cases: finite-difference error {:.2e}, expected-gradient error {:.2e}, zero-residual gradient {:.2e}{}",
        report.cases.len(),
        report.fd_max_rel_err,
        report.expected_max_rel_err,
        report.zero_residual_max_abs,
        if failed > 0 { format!(", {failed} cases failed") } else { String::new() }
    );
    Ok(())
}

pub fn lemma_check(cmd: SuiteCmd) -> Result<(), CliError> {
    let mut params: LemmaSuiteParams = suite_params(&cmd)?;
    if let Some(seed) = cmd.seed {
        params.seed = seed;
    }
    if params.trials == 0 {
        return Err(CliError::field("trials", "must be at least 1"));
    }
    let report = lemma_event_suite(&params);
    write_report(&cmd.out.clone().unwrap_or_else(default_out), &report)?;
    let worst = std::iter::once(&report.ls_error)
        .chain(&report.items)
        .min_by(|a, b| a.frequency.total_cmp(&b.frequency));
    if let Some(w) = worst {
        println!(
            "{} events, lowest frequency {:.4} ({}), min beta {:.5}, {} errors",
            report.items.len() + 1,
            w.frequency,
            w.name,
            report.beta.min_beta_event,
            report.errors.len()
        );
    }
    Ok(())
}
