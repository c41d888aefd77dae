use lrcs::linalg::{subspace_distance_2, top_r_left_singular_vectors, Matrix, OrthonormalBasis, Vector};
use lrcs::model::*;

#[test]
fn top_r_agrees_with_eigen_decomposition() {
    for seed in 0..5 {
        let m = gaussian_matrix(20, 10, &mut SeedSpec::new(seed).stream(StreamLabel::Auxiliary, 0));
        let u = top_r_left_singular_vectors(&m, 3).unwrap();
        // Brute force: eigenvectors of M Mᵀ for the three largest eigenvalues.
        let eig = (&m * m.transpose()).symmetric_eigen();
        let mut order: Vec<usize> = (0..20).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let cols: Vec<Vector> = order[..3].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        let oracle = OrthonormalBasis::new(Matrix::from_columns(&cols)).unwrap();
        assert!(subspace_distance_2(&u, &oracle).unwrap() <= 1e-8);
    }
}

#[test]
fn sketch_is_unbiased_for_the_column() {
    let gt = generate_ground_truth(12, 3, 2, 2.0, &SeedSpec::new(4)).unwrap();
    let m = 10;
    let x = gt.x_star.column(1).into_owned();
    let mut mean = Vector::zeros(12);
    let draws = 2000;
    for i in 0..draws {
        let phase = sketch_phase(&gt.x_star, m, PhaseLabel::Alpha, &SeedSpec::new(100).derive("mc", i)).unwrap();
        let c = &phase.columns[1];
        mean += c.a.tr_mul(&c.y);
    }
    mean /= draws as f64;
    let target = &x * m as f64;
    assert!((&mean - &target).norm() <= 0.05 * target.norm(), "{}", (&mean - &target).norm() / target.norm());
}

#[test]
fn ground_truth_summary_serializes() {
    let gt = generate_ground_truth(10, 8, 2, 3.0, &SeedSpec::new(9)).unwrap();
    let json = serde_json::to_value(gt.summary()).unwrap();
    assert_eq!(json["n"], 10);
    assert_eq!(json["q"], 8);
    assert_eq!(json["r"], 2);
    assert!((json["kappa"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(json["seed"], 9);
    assert!(json["mu"].as_f64().unwrap() >= 1.0 - 1e-12);
}

#[test]
fn split_sketches_use_disjoint_streams() {
    let gt = generate_ground_truth(10, 4, 2, 2.0, &SeedSpec::new(1)).unwrap();
    let s = sketch(&gt, 6, SplitMode::Split { iterations: 2 }, &SeedSpec::new(2)).unwrap();
    for (i, p) in s.phases.iter().enumerate() {
        for q in &s.phases[i + 1..] {
            for k in 0..4 {
                assert_ne!(p.columns[k].a, q.columns[k].a);
            }
        }
    }
}

#[test]
fn files_round_trip_through_the_container() {
    let gt = generate_ground_truth(9, 7, 2, 2.0, &SeedSpec::new(5)).unwrap();
    let s = sketch(&gt, 4, SplitMode::Split { iterations: 1 }, &SeedSpec::new(6)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.bin");
    {
        let mut f = std::fs::File::create(&path).unwrap();
        write_ground_truth(&mut f, &gt).unwrap();
        write_sketch_set(&mut f, &s).unwrap();
    }
    let mut f = std::fs::File::open(&path).unwrap();
    let gt2 = read_ground_truth(&mut f).unwrap();
    let s2 = read_sketch_set(&mut f).unwrap();
    assert_eq!(gt2.x_star, gt.x_star);
    assert_eq!(gt2.mu.to_bits(), gt.mu.to_bits());
    assert_eq!(s2, s);
}
