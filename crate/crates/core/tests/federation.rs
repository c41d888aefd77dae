use lrcs::federation::*;
use lrcs::model::{generate_ground_truth, sketch, GroundTruth, SeedSpec, SketchSet, SplitMode};
use lrcs::solver::{gradient, min_step, run_altgdmin, SolverConfig};

fn instance(n: usize, q: usize, r: usize, m: usize, mode: SplitMode, seed: u64) -> (GroundTruth, SketchSet) {
    let kappa = if r == 1 { 1.0 } else { 2.0 };
    let gt = generate_ground_truth(n, q, r, kappa, &SeedSpec::new(seed)).unwrap();
    let s = sketch(&gt, m, mode, &SeedSpec::new(seed + 100)).unwrap();
    (gt, s)
}

const POLICIES: [PartitionPolicy; 2] = [PartitionPolicy::Contiguous, PartitionPolicy::RoundRobin];

#[test]
fn gradient_round_matches_centralized_bitwise() {
    let (gt, s) = instance(30, 17, 2, 12, SplitMode::Shared, 3);
    let phase = &s.phases[0];
    let u = lrcs::linalg::qr_orthonormalize(&(gt.u_star.matrix() + lrcs::linalg::Matrix::from_fn(30, 2, |i, j| {
        0.01 * ((i * 7 + j * 3) % 5) as f64
    })))
    .unwrap()
    .0;
    let b = min_step(&u, phase).unwrap();
    let central = gradient(&u, &b, phase).unwrap();
    for nodes in [1, 2, 5] {
        for policy in POLICIES {
            let a = partition_columns(17, nodes, policy).unwrap();
            let (g, log) = federated_gradient_round(&u, &b, &a, phase).unwrap();
            assert_eq!(g, central, "N = {nodes}, {policy:?}");
            assert_eq!(log.len(), nodes + 1);
        }
    }
}

#[test]
fn gradient_round_message_counts() {
    let (gt, s) = instance(100, 8, 2, 10, SplitMode::Shared, 4);
    let a = partition_columns(8, 4, PartitionPolicy::Contiguous).unwrap();
    let (_, log) = federated_gradient_round(&gt.u_star, &gt.b_star, &a, &s.phases[0]).unwrap();
    let uploads: Vec<_> = log.iter().filter(|m| m.direction == Direction::NodeToCoordinator).collect();
    let broadcasts: Vec<_> = log.iter().filter(|m| m.direction == Direction::CoordinatorToNode).collect();
    assert_eq!(uploads.len(), 4);
    assert!(uploads.iter().all(|m| m.scalar_count == 200 && m.kind == PayloadKind::PartialGradient));
    assert_eq!(broadcasts.len(), 1);
    assert_eq!(broadcasts[0].scalar_count, 200);
    assert_eq!(broadcasts[0].kind, PayloadKind::BroadcastU);
}

#[test]
fn zero_residual_round_is_zero() {
    let (gt, s) = instance(20, 6, 2, 8, SplitMode::Shared, 5);
    let a = partition_columns(6, 3, PartitionPolicy::RoundRobin).unwrap();
    let (g, _) = federated_gradient_round(&gt.u_star, &gt.b_star, &a, &s.phases[0]).unwrap();
    let b = min_step(&gt.u_star, &s.phases[0]).unwrap();
    let (g2, _) = federated_gradient_round(&gt.u_star, &b, &a, &s.phases[0]).unwrap();
    assert!(g.iter().all(|v| v.abs() < 1e-10));
    assert!(g2.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn assignment_must_match_data() {
    let (gt, s) = instance(10, 6, 1, 5, SplitMode::Shared, 6);
    let a = partition_columns(5, 2, PartitionPolicy::Contiguous).unwrap();
    assert!(matches!(
        federated_gradient_round(&gt.u_star, &gt.b_star, &a, &s.phases[0]),
        Err(FederationError::AssignmentMismatch(_))
    ));
    let cfg = SolverConfig::new(1, 3);
    assert!(matches!(
        run_federated_altgdmin(&cfg, &s, &a, Some(&gt)),
        Err(FederationError::AssignmentMismatch(_))
    ));
}

fn check_equivalence(mode: SplitMode, iterations: usize) {
    let (gt, s) = instance(40, 30, 2, 20, mode, 9);
    let mut cfg = SolverConfig::new(2, iterations).with_oracle_sigma(&gt);
    cfg.split = matches!(mode, SplitMode::Split { .. });
    let (est, trace) = run_altgdmin(&cfg, &s, Some(&gt)).unwrap();
    let csv = trace.to_csv_string(false);
    for nodes in [1, 2, 5] {
        for policy in POLICIES {
            let a = partition_columns(30, nodes, policy).unwrap();
            let (fest, ftrace, ledger) = run_federated_altgdmin(&cfg, &s, &a, Some(&gt)).unwrap();
            assert_eq!(fest, est, "N = {nodes}, {policy:?}");
            assert_eq!(ftrace.to_csv_string(false), csv);
            assert_eq!(
                ftrace.final_se2().unwrap().to_bits(),
                trace.final_se2().unwrap().to_bits()
            );
            assert_eq!(ledger.rows.len(), (iterations + 1) * nodes);
            for t in 1..=iterations {
                assert_eq!(ledger.upload_total(t), (nodes * 40 * 2) as u64);
                assert_eq!(ledger.download_total(t), (nodes * 40 * 2) as u64);
            }
            for j in 0..nodes {
                let row = ledger.rows[j];
                assert_eq!(row.upload_scalars, 1 + 40 * a.columns(j).len() as u64);
                assert_eq!(row.download_scalars, 1 + 80);
            }
        }
    }
}

#[test]
fn federated_run_equals_centralized_shared() {
    check_equivalence(SplitMode::Shared, 25);
}

#[test]
fn federated_run_equals_centralized_split() {
    check_equivalence(SplitMode::Split { iterations: 6 }, 6);
}

#[test]
fn federated_alpha_equals_centralized() {
    let (gt, s) = instance(40, 30, 2, 20, SplitMode::Shared, 11);
    let cfg = SolverConfig::new(2, 1).with_oracle_sigma(&gt);
    let (_, trace) = run_altgdmin(&cfg, &s, Some(&gt)).unwrap();
    let c_tilde = gt.default_c_tilde();
    assert_eq!(
        trace.alpha.to_bits(),
        lrcs::solver::compute_alpha(&s.phases[0], c_tilde).unwrap().to_bits()
    );
    let a = partition_columns(30, 4, PartitionPolicy::RoundRobin).unwrap();
    let (_, ftrace, _) = run_federated_altgdmin(&cfg, &s, &a, Some(&gt)).unwrap();
    assert_eq!(ftrace.alpha.to_bits(), trace.alpha.to_bits());
}

#[test]
fn ledger_csv_layout() {
    let (gt, s) = instance(10, 4, 1, 5, SplitMode::Shared, 12);
    let cfg = SolverConfig::new(1, 2).with_oracle_sigma(&gt);
    let a = partition_columns(4, 2, PartitionPolicy::Contiguous).unwrap();
    let (_, _, ledger) = run_federated_altgdmin(&cfg, &s, &a, Some(&gt)).unwrap();
    assert_eq!(
        ledger.to_csv_string(),
        "iter,node,upload_scalars,download_scalars\n0,0,21,11\n0,1,21,11\n1,0,10,10\n1,1,10,10\n2,0,10,10\n2,1,10,10\n"
    );
}
