//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::time::Instant;

use lrcs::bench::*;
use lrcs::federation::{partition_columns, run_federated_altgdmin, PartitionPolicy};
use lrcs::linalg::{orthonormality_deviation, qr_orthonormalize, subspace_distance_2, subspace_distance_f};
use lrcs::model::{gaussian_matrix, generate_ground_truth, sketch, SeedSpec, SplitMode, StreamLabel};
use lrcs::solver::{
    compute_alpha, gd_step, gradient, min_step, run_altgdmin, spectral_init_with_sigma, SolverConfig,
};

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        println!("[{}] criterion {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn reference_grid() -> ExperimentGrid {
    let mut grid = ExperimentGrid::single(100, 200, 2, 2.0, 60);
    grid.trials = 20;
    grid.solver.iterations = 400;
    grid.solver.c_eta = 0.4;
    grid.solver.sigma_max_mode = SigmaChoice::Oracle;
    grid
}

fn recovery_and_contraction(rep: &mut Report) {
    let grid = reference_grid();
    let start = Instant::now();
    let cells = run_grid(&grid).expect("valid grid");
    let secs = start.elapsed().as_secs_f64();
    let cell = &cells[0];
    let good = cell
        .trial_results
        .iter()
        .filter(|t| t.final_se2.is_some_and(|s| s <= 1e-8) && t.final_max_rel_col_err.is_some_and(|e| e <= 1e-7))
        .count();
    let worst_se2 = cell.trial_results.iter().filter_map(|t| t.final_se2).fold(0.0, f64::max);
    rep.check(
        "1",
        "end-to-end recovery",
        good >= 18 && secs <= 60.0,
        format!("{good}/20 trials with SE₂ ≤ 1e-8 and column error ≤ 1e-7 (worst SE₂ {worst_se2:.2e}); {secs:.1} s total"),
    );

    let hit = cell.contraction_hit_rate.unwrap_or(0.0);
    let r2 = cell.median_r2.unwrap_or(0.0);
    let bound = contraction_bound(0.4, 2.0, CONTRACTION_SLACK);
    rep.check(
        "2",
        "geometric contraction",
        hit >= 0.9 && r2 >= 0.95,
        format!(
            "{:.1}% of in-regime ratios ≤ {bound:.3} (median ratio {:.4}); median R² {r2:.4}",
            100.0 * hit,
            cell.median_contraction.unwrap_or(f64::NAN)
        ),
    );
}

fn init_trend(rep: &mut Report) {
    let mut grid = reference_grid();
    grid.m = vec![30, 60, 120];
    grid.solver.iterations = 1;
    let cells = run_grid(&grid).expect("valid grid");
    let med: Vec<f64> = cells.iter().map(|c| c.median_init_se2.unwrap_or(f64::NAN)).collect();
    let decreasing = med[0] > med[1] && med[1] > med[2];
    rep.check(
        "3",
        "initialization quality trend",
        decreasing && med[1] <= 0.5,
        format!("median SE₂(U₀, U⋆) at m = 30, 60, 120: {:.4}, {:.4}, {:.4}", med[0], med[1], med[2]),
    );
}

fn gradient_checks(rep: &mut Report) {
    let report = gradient_oracle_suite(&GradientSuiteParams::default());
    let case = &report.cases[0];
    rep.check(
        "4",
        "gradient correctness",
        report.fd_max_rel_err <= 1e-5 && report.zero_residual_max_abs == 0.0,
        format!(
            "finite-difference max rel err {:.2e} over {} directions; zero-residual max |entry| {:e}",
            report.fd_max_rel_err, report.params.directions, report.zero_residual_max_abs
        ),
    );
    // The expected-gradient run is timed separately from the other checks.
    let params = GradientSuiteParams {
        directions: 0,
        ..GradientSuiteParams::default()
    };
    let start = Instant::now();
    let mc = gradient_oracle_suite(&params);
    let secs = start.elapsed().as_secs_f64();
    rep.check(
        "5",
        "expected-gradient identity",
        mc.expected_max_rel_err <= 0.05 && secs <= 30.0 && case.error.is_none(),
        format!(
            "rel Frobenius err {:.4} over {} samples; {secs:.2} s",
            mc.expected_max_rel_err, params.mc_samples
        ),
    );
}

fn min_step_exactness(rep: &mut Report) {
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let gt = generate_ground_truth(100, 200, 2, 2.0, &SeedSpec::new(seed)).unwrap();
        let s = sketch(&gt, 60, SplitMode::Shared, &SeedSpec::new(1000 + seed)).unwrap();
        let b = min_step(&gt.u_star, &s.phases[0]).unwrap();
        worst = worst.max((&b - &gt.b_star).norm() / gt.b_star.norm());
    }
    rep.check(
        "6",
        "min-step exactness",
        worst <= 1e-12,
        format!("max ‖B − B⋆‖_F/‖B⋆‖_F over 5 instances {worst:.2e}"),
    );
}

fn event_frequencies(rep: &mut Report) {
    let report = lemma_event_suite(&LemmaSuiteParams::default());
    let f = |name: &str| report.item(name).map(|e| e.frequency).unwrap_or(f64::NAN);
    let (ls, smin, smax) = (report.ls_error.frequency, f("sigma_min_b_slack"), f("sigma_max_b_slack"));
    rep.check(
        "7",
        "high-probability event frequencies",
        ls >= 0.99 && smin >= 0.95 && smax >= 0.95,
        format!(
            "LS error bound {:.4} of {} columns; σ_min(B) ≥ 0.855σ⋆_min {:.2}, σ_max(B) ≤ 1.155σ⋆_max {:.2} of {} trials",
            ls, report.ls_error.total, smin, smax, report.params.trials
        ),
    );
    let beta_ok = report.beta.min_beta_event >= 0.9;
    let init_ok = report.init_expectation.len() == 2 && report.init_expectation.iter().all(|c| c.rel_err <= 0.05);
    let init_detail: Vec<String> = report
        .init_expectation
        .iter()
        .map(|c| format!("{} (min β {:.3}) rel err {:.4}", c.label, c.min_beta, c.rel_err))
        .collect();
    rep.check(
        "8",
        "truncation and initialization statistics",
        beta_ok && init_ok,
        format!(
            "min β_k on the threshold event {:.5}; E[X̂₀|α] check: {}",
            report.beta.min_beta_event,
            init_detail.join(", ")
        ),
    );
}

fn federated_equivalence(rep: &mut Report) {
    let gt = generate_ground_truth(100, 200, 2, 2.0, &SeedSpec::new(7)).unwrap();
    let s = sketch(&gt, 60, SplitMode::Shared, &SeedSpec::new(8)).unwrap();
    let cfg = SolverConfig::new(2, 400).with_oracle_sigma(&gt);
    let (_, central) = run_altgdmin(&cfg, &s, Some(&gt)).unwrap();
    let central_csv = central.to_csv_string(false);
    let mut ok = true;
    let mut details = Vec::new();
    for nodes in [1, 2, 5] {
        for policy in [PartitionPolicy::Contiguous, PartitionPolicy::RoundRobin] {
            let a = partition_columns(200, nodes, policy).unwrap();
            let (_, trace, ledger) = run_federated_altgdmin(&cfg, &s, &a, Some(&gt)).unwrap();
            let same = trace.to_csv_string(false) == central_csv;
            let counts = (1..=400).all(|t| ledger.upload_total(t) == (nodes * 100 * 2) as u64);
            ok &= same && counts;
            if policy == PartitionPolicy::Contiguous {
                details.push(format!("N={nodes}: bytes {}, upload/iter {}", if same { "equal" } else { "DIFFER" }, ledger.upload_total(1)));
            } else if !(same && counts) {
                details.push(format!("N={nodes} round-robin mismatch"));
            }
        }
    }
    rep.check("9", "federated equivalence and communication", ok, details.join("; "));
}

fn structural_invariants(rep: &mut Report) {
    // Orthonormality of every iterate of one reference run, replayed step by step.
    let gt = generate_ground_truth(100, 200, 2, 2.0, &SeedSpec::new(3)).unwrap();
    let s = sketch(&gt, 60, SplitMode::Shared, &SeedSpec::new(4)).unwrap();
    let phase = &s.phases[0];
    let alpha = compute_alpha(phase, gt.default_c_tilde()).unwrap();
    let (mut u, _) = spectral_init_with_sigma(phase, alpha, 2).unwrap();
    let step = 0.4 / (60.0 * gt.sigma_max() * gt.sigma_max());
    let mut worst_dev = orthonormality_deviation(u.matrix());
    for _ in 0..400 {
        let b = min_step(&u, phase).unwrap();
        let g = gradient(&u, &b, phase).unwrap();
        u = gd_step(&u, &g, step).unwrap();
        worst_dev = worst_dev.max(orthonormality_deviation(u.matrix()));
    }
    let orth_ok = worst_dev <= 1e-10;

    let seed = SeedSpec::new(11);
    let mut worst_gap = f64::NEG_INFINITY;
    for i in 0..1000u64 {
        let mut rng = seed.stream(StreamLabel::Auxiliary, i);
        let n = 2 + (i as usize % 19);
        let r = 1 + (i as usize % n.min(5));
        let a = qr_orthonormalize(&gaussian_matrix(n, r, &mut rng)).unwrap().0;
        let b = qr_orthonormalize(&gaussian_matrix(n, r, &mut rng)).unwrap().0;
        let gap = subspace_distance_f(&a, &b).unwrap() - (r as f64).sqrt() * subspace_distance_2(&a, &b).unwrap();
        worst_gap = worst_gap.max(gap);
    }
    let se_ok = worst_gap <= 1e-12;

    let det_ok = determinism();
    rep.check(
        "10",
        "structural invariants",
        orth_ok && se_ok && det_ok,
        format!(
            "max ‖UᵀU − I‖_max over 401 iterates {worst_dev:.2e}; max SE_F − √r·SE₂ over 1000 pairs {worst_gap:.2e}; reruns bit-identical: {det_ok}"
        ),
    );
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> bool {
    let gt_a = generate_ground_truth(40, 60, 2, 2.0, &SeedSpec::new(21)).unwrap();
    let gt_b = generate_ground_truth(40, 60, 2, 2.0, &SeedSpec::new(21)).unwrap();
    let sk_a = sketch(&gt_a, 25, SplitMode::Shared, &SeedSpec::new(22)).unwrap();
    let sk_b = sketch(&gt_b, 25, SplitMode::Shared, &SeedSpec::new(22)).unwrap();
    let mut gen_a = Vec::new();
    let mut gen_b = Vec::new();
    lrcs::model::write_ground_truth(&mut gen_a, &gt_a).unwrap();
    lrcs::model::write_sketch_set(&mut gen_a, &sk_a).unwrap();
    lrcs::model::write_ground_truth(&mut gen_b, &gt_b).unwrap();
    lrcs::model::write_sketch_set(&mut gen_b, &sk_b).unwrap();

    let cfg = SolverConfig::new(2, 60).with_oracle_sigma(&gt_a);
    let (est_a, tr_a) = run_altgdmin(&cfg, &sk_a, Some(&gt_a)).unwrap();
    let (est_b, tr_b) = run_altgdmin(&cfg, &sk_b, Some(&gt_b)).unwrap();
    let a = partition_columns(60, 4, PartitionPolicy::RoundRobin).unwrap();
    let (_, ftr_a, led_a) = run_federated_altgdmin(&cfg, &sk_a, &a, Some(&gt_a)).unwrap();
    let (_, ftr_b, led_b) = run_federated_altgdmin(&cfg, &sk_b, &a, Some(&gt_b)).unwrap();

    let mut grid = ExperimentGrid::single(40, 60, 2, 2.0, 25);
    grid.trials = 3;
    grid.solver.iterations = 30;
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    grid.output = Some(d1.path().to_path_buf());
    run_grid(&grid).unwrap();
    grid.output = Some(d2.path().to_path_buf());
    run_grid(&grid).unwrap();

    let gp = GradientSuiteParams {
        mc_samples: 50,
        ..GradientSuiteParams::default()
    };
    let (g1, g2) = (gradient_oracle_suite(&gp), gradient_oracle_suite(&gp));
    let lp = LemmaSuiteParams {
        trials: 3,
        init: InitCheckParams {
            samples: 50,
            ..InitCheckParams::default()
        },
        ..LemmaSuiteParams::default()
    };
    let (l1, l2) = (lemma_event_suite(&lp), lemma_event_suite(&lp));
    let strip_grad = |r: &GradientReport| {
        let mut r = r.clone();
        r.cases.iter_mut().for_each(|c| c.runtime_ms = 0.0);
        serde_json::to_string(&r).unwrap()
    };
    let strip_lemma = |r: &LemmaReport| {
        let mut r = r.clone();
        r.runtime_ms = 0.0;
        serde_json::to_string(&r).unwrap()
    };

    gen_a == gen_b
        && est_a == est_b
        && tr_a.to_csv_string(false) == tr_b.to_csv_string(false)
        && ftr_a.to_csv_string(false) == ftr_b.to_csv_string(false)
        && led_a == led_b
        && dir_bytes(d1.path()) == dir_bytes(d2.path())
        && strip_grad(&g1) == strip_grad(&g2)
        && strip_lemma(&l1) == strip_lemma(&l2)
}

fn main() {
    let mut rep = Report { failures: 0 };
    recovery_and_contraction(&mut rep);
    init_trend(&mut rep);
    gradient_checks(&mut rep);
    min_step_exactness(&mut rep);
    event_frequencies(&mut rep);
    federated_equivalence(&mut rep);
    structural_invariants(&mut rep);
    if rep.failures > 0 {
        println!("{} criteria failed", rep.failures);
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
