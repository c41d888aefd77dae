use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GroundTruth, ModelError, SeedSpec, StreamLabel};
use crate::linalg::{Matrix, Vector};

/// Role of a measurement set in the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    /// One set reused by every step (no sample splitting).
    Shared,
    /// Truncation threshold.
    Alpha,
    /// Spectral initialization.
    Init,
    /// Least-squares step of iteration `t` (1-based).
    Ls(usize),
    /// Gradient step of iteration `t` (1-based).
    Gd(usize),
}

impl PhaseLabel {
    pub(crate) fn code(&self) -> (u32, u32) {
        match *self {
            PhaseLabel::Shared => (0, 0),
            PhaseLabel::Alpha => (1, 0),
            PhaseLabel::Init => (2, 0),
            PhaseLabel::Ls(t) => (3, t as u32),
            PhaseLabel::Gd(t) => (4, t as u32),
        }
    }

    pub(crate) fn from_code(kind: u32, index: u32) -> Option<Self> {
        Some(match kind {
            0 => PhaseLabel::Shared,
            1 => PhaseLabel::Alpha,
            2 => PhaseLabel::Init,
            3 => PhaseLabel::Ls(index as usize),
            4 => PhaseLabel::Gd(index as usize),
            _ => return None,
        })
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseLabel::Shared => write!(f, "shared"),
            PhaseLabel::Alpha => write!(f, "alpha"),
            PhaseLabel::Init => write!(f, "init"),
            PhaseLabel::Ls(t) => write!(f, "ls({t})"),
            PhaseLabel::Gd(t) => write!(f, "gd({t})"),
        }
    }
}

/// Whether each step draws fresh measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// A single measurement set feeds every step.
    Shared,
    /// `2T + 2` disjoint sets: threshold, init, then one least-squares and
    /// one gradient set per iteration.
    Split { iterations: usize },
}

/// Sketch of one column: `y = A x⋆_k` with `A` of size `m x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSketch {
    pub a: Matrix,
    pub y: Vector,
}

/// One measurement set covering every column.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub label: PhaseLabel,
    pub columns: Vec<ColumnSketch>,
}

impl Phase {
    pub fn m(&self) -> usize {
        self.columns.first().map_or(0, |c| c.y.len())
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, |c| c.a.ncols())
    }

    pub fn q(&self) -> usize {
        self.columns.len()
    }
}

/// Every measurement set of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchSet {
    pub m: usize,
    pub n: usize,
    pub q: usize,
    pub mode: SplitMode,
    pub phases: Vec<Phase>,
}

impl SketchSet {
    /// Phase with the given label; in shared mode every label resolves to
    /// the single shared set.
    pub fn phase(&self, label: PhaseLabel) -> Option<&Phase> {
        match self.mode {
            SplitMode::Shared => self.phases.first(),
            SplitMode::Split { .. } => self.phases.iter().find(|p| p.label == label),
        }
    }

    pub fn alpha(&self) -> Option<&Phase> {
        self.phase(PhaseLabel::Alpha)
    }

    pub fn init(&self) -> Option<&Phase> {
        self.phase(PhaseLabel::Init)
    }

    pub fn ls(&self, t: usize) -> Option<&Phase> {
        self.phase(PhaseLabel::Ls(t))
    }

    pub fn gd(&self, t: usize) -> Option<&Phase> {
        self.phase(PhaseLabel::Gd(t))
    }

    pub fn labels(&self) -> Vec<PhaseLabel> {
        self.phases.iter().map(|p| p.label).collect()
    }

    pub fn is_split(&self) -> bool {
        matches!(self.mode, SplitMode::Split { .. })
    }

    /// Number of GDmin iterations the split sets can feed (unbounded for
    /// shared mode).
    pub fn iteration_capacity(&self) -> Option<usize> {
        match self.mode {
            SplitMode::Shared => None,
            SplitMode::Split { iterations } => Some(iterations),
        }
    }
}

fn split_labels(mode: SplitMode) -> Vec<PhaseLabel> {
    match mode {
        SplitMode::Shared => vec![PhaseLabel::Shared],
        SplitMode::Split { iterations } => {
            let mut labels = vec![PhaseLabel::Alpha, PhaseLabel::Init];
            labels.extend((1..=iterations).map(PhaseLabel::Ls));
            labels.extend((1..=iterations).map(PhaseLabel::Gd));
            labels
        }
    }
}

fn column_sketch(
    x: nalgebra::DVectorView<'_, f64>,
    m: usize,
    label: PhaseLabel,
    k: usize,
    seed: &SeedSpec,
    noise_std: f64,
) -> ColumnSketch {
    let n = x.len();
    let mut rng = seed.stream(StreamLabel::Sketch(label), k as u64);
    // row-major draw order: the first m' rows of an m-row sketch are the
    // m'-row sketch from the same stream
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        data.push(rng.sample::<f64, _>(StandardNormal));
    }
    let a = Matrix::from_row_slice(m, n, &data);
    let mut y = &a * x;
    if noise_std > 0.0 {
        let mut noise = seed.stream(StreamLabel::Noise(label), k as u64);
        for v in y.iter_mut() {
            *v += noise_std * noise.sample::<f64, _>(StandardNormal);
        }
    }
    ColumnSketch { a, y }
}

/// One measurement set of `x` (any `n x q` matrix) with `m` rows per column.
pub fn sketch_phase(x: &Matrix, m: usize, label: PhaseLabel, seed: &SeedSpec) -> Result<Phase, ModelError> {
    phase_with_noise(x, m, label, seed, 0.0)
}

fn phase_with_noise(
    x: &Matrix,
    m: usize,
    label: PhaseLabel,
    seed: &SeedSpec,
    noise_std: f64,
) -> Result<Phase, ModelError> {
    if m == 0 {
        return Err(ModelError::NoMeasurements);
    }
    let columns = (0..x.ncols())
        .into_par_iter()
        .map(|k| column_sketch(x.column(k), m, label, k, seed, noise_std))
        .collect();
    Ok(Phase { label, columns })
}

/// Noiseless sketches `y_k = A_k x⋆_k` of every column, one set per phase
/// of `mode`.
pub fn sketch(gt: &GroundTruth, m: usize, mode: SplitMode, seed: &SeedSpec) -> Result<SketchSet, ModelError> {
    sketch_noisy(gt, m, mode, seed, 0.0)
}

/// [`sketch`] with additive `N(0, noise_std²)` measurement noise. The
/// noise draws come from their own streams, so the `A_k` are identical to
/// the noiseless sketch with the same seed.
pub fn sketch_noisy(
    gt: &GroundTruth,
    m: usize,
    mode: SplitMode,
    seed: &SeedSpec,
    noise_std: f64,
) -> Result<SketchSet, ModelError> {
    if m == 0 {
        return Err(ModelError::NoMeasurements);
    }
    let phases = split_labels(mode)
        .into_iter()
        .map(|label| phase_with_noise(&gt.x_star, m, label, seed, noise_std))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SketchSet {
        m,
        n: gt.n,
        q: gt.q,
        mode,
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_ground_truth;

    #[test]
    fn measurements_match_model() {
        let gt = generate_ground_truth(12, 9, 2, 2.0, &SeedSpec::new(1)).unwrap();
        let s = sketch(&gt, 7, SplitMode::Shared, &SeedSpec::new(2)).unwrap();
        assert_eq!(s.phases.len(), 1);
        for (k, c) in s.phases[0].columns.iter().enumerate() {
            let expected = &c.a * gt.x_star.column(k);
            assert!((&c.y - &expected).norm() <= 1e-12 * expected.norm());
            assert_eq!(c.a.shape(), (7, 12));
        }
    }

    #[test]
    fn split_mode_has_two_t_plus_two_phases() {
        let gt = generate_ground_truth(6, 5, 2, 2.0, &SeedSpec::new(1)).unwrap();
        let s = sketch(&gt, 3, SplitMode::Split { iterations: 3 }, &SeedSpec::new(4)).unwrap();
        assert_eq!(
            s.labels(),
            vec![
                PhaseLabel::Alpha,
                PhaseLabel::Init,
                PhaseLabel::Ls(1),
                PhaseLabel::Ls(2),
                PhaseLabel::Ls(3),
                PhaseLabel::Gd(1),
                PhaseLabel::Gd(2),
                PhaseLabel::Gd(3),
            ]
        );
        assert_ne!(s.alpha().unwrap().columns[0].a, s.init().unwrap().columns[0].a);
        assert_ne!(s.ls(2).unwrap().columns[0].a, s.gd(2).unwrap().columns[0].a);
        assert!(s.ls(4).is_none());
    }

    #[test]
    fn shared_mode_resolves_every_label() {
        let gt = generate_ground_truth(6, 5, 2, 2.0, &SeedSpec::new(1)).unwrap();
        let s = sketch(&gt, 3, SplitMode::Shared, &SeedSpec::new(4)).unwrap();
        assert_eq!(s.alpha(), s.gd(17));
        assert_eq!(s.init(), s.ls(1));
    }

    #[test]
    fn zero_column_gives_zero_measurements() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let p = sketch_phase(&x, 5, PhaseLabel::Shared, &SeedSpec::new(8)).unwrap();
        assert!(p.columns[1].y.iter().all(|&v| v == 0.0));
        assert!(p.columns[0].y.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn prefix_rows_coincide_across_m() {
        let x = Matrix::from_element(4, 2, 1.0);
        let short = sketch_phase(&x, 3, PhaseLabel::Shared, &SeedSpec::new(8)).unwrap();
        let long = sketch_phase(&x, 6, PhaseLabel::Shared, &SeedSpec::new(8)).unwrap();
        assert_eq!(short.columns[1].a, long.columns[1].a.rows(0, 3).into_owned());
    }

    #[test]
    fn noise_perturbs_only_observations() {
        let gt = generate_ground_truth(6, 4, 2, 2.0, &SeedSpec::new(1)).unwrap();
        let clean = sketch(&gt, 5, SplitMode::Shared, &SeedSpec::new(3)).unwrap();
        let noisy = sketch_noisy(&gt, 5, SplitMode::Shared, &SeedSpec::new(3), 0.1).unwrap();
        assert_eq!(clean.phases[0].columns[2].a, noisy.phases[0].columns[2].a);
        assert_ne!(clean.phases[0].columns[2].y, noisy.phases[0].columns[2].y);
    }

    #[test]
    fn reproducible() {
        let gt = generate_ground_truth(6, 4, 2, 2.0, &SeedSpec::new(1)).unwrap();
        let a = sketch(&gt, 5, SplitMode::Split { iterations: 2 }, &SeedSpec::new(3)).unwrap();
        let b = sketch(&gt, 5, SplitMode::Split { iterations: 2 }, &SeedSpec::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_measurements_rejected() {
        let gt = generate_ground_truth(6, 4, 2, 2.0, &SeedSpec::new(1)).unwrap();
        assert!(matches!(
            sketch(&gt, 0, SplitMode::Shared, &SeedSpec::new(3)),
            Err(ModelError::NoMeasurements)
        ));
    }
}
