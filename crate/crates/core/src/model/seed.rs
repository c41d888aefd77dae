use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PhaseLabel;

/// Root of every random stream in an experiment.
///
/// Child streams are ChaCha20 generators keyed by
/// `SHA-256(master_seed ‖ label ‖ index)`, so the stream for a given
/// (label, column) pair is fixed regardless of generation order or
/// thread schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

/// What a child stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    TruthBasis,
    TruthRows,
    Sketch(PhaseLabel),
    Noise(PhaseLabel),
    /// Draws made by test harnesses (perturbations, probe directions).
    Auxiliary,
}

impl StreamLabel {
    fn encode(&self, out: &mut Vec<u8>) {
        let (tag, phase) = match self {
            StreamLabel::TruthBasis => (1u8, None),
            StreamLabel::TruthRows => (2, None),
            StreamLabel::Sketch(p) => (3, Some(p)),
            StreamLabel::Noise(p) => (4, Some(p)),
            StreamLabel::Auxiliary => (5, None),
        };
        out.push(tag);
        if let Some(p) = phase {
            let (kind, index) = p.code();
            out.extend_from_slice(&kind.to_le_bytes());
            out.extend_from_slice(&index.to_le_bytes());
        }
    }
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    fn digest(&self, domain: &[u8], label: &[u8], index: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"lrcs-seed-v1");
        h.update(domain);
        h.update(self.master_seed.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label);
        h.update(index.to_le_bytes());
        h.finalize().into()
    }

    /// Generator for `label` and column (or other) `index`.
    pub fn stream(&self, label: StreamLabel, index: u64) -> ChaCha20Rng {
        let mut bytes = Vec::with_capacity(16);
        label.encode(&mut bytes);
        ChaCha20Rng::from_seed(self.digest(b"stream", &bytes, index))
    }

    /// An independent seed for a named sub-experiment, e.g. one trial of a
    /// Monte-Carlo sweep.
    pub fn derive(&self, tag: &str, index: u64) -> SeedSpec {
        let d = self.digest(b"derive", tag.as_bytes(), index);
        let mut head = [0u8; 8];
        head.copy_from_slice(&d[..8]);
        SeedSpec::new(u64::from_le_bytes(head))
    }
}
