//! Seeded, splittable random streams.
//!
//! Every path, chain and subset draw owns an [`RngStream`]; the pair
//! `(seed, stream_id)` fully determines the generated numbers, so batches can
//! be evaluated in any order (or in parallel) and still reproduce bit-exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// SplitMix64 finalizer, used to derive child seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a sequence of labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(mix64(seed), |acc, &l| mix64(acc ^ mix64(l)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for the `index`-th member of a batch: `stream_id = batch_seed ^ index`.
    pub fn for_path(batch_seed: u64, index: usize) -> Self {
        Self {
            seed: batch_seed,
            stream_id: batch_seed ^ index as u64,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    pub fn normals(&self) -> GaussianNoise {
        GaussianNoise { rng: self.rng() }
    }
}

/// Source of the standard-normal increments that drive a discretized SDE.
pub trait NoiseSource {
    fn fill(&mut self, out: &mut [f64]);
}

pub struct GaussianNoise {
    rng: ChaCha8Rng,
}

impl GaussianNoise {
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl NoiseSource for GaussianNoise {
    fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
    }
}

/// Deterministic noise for tests: zeros forever.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn fill(&mut self, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Replays a fixed increment sequence, then zeros once exhausted.
#[derive(Debug, Clone)]
pub struct ScriptedNoise {
    values: Vec<f64>,
    pos: usize,
}

impl ScriptedNoise {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, pos: 0 }
    }
}

impl NoiseSource for ScriptedNoise {
    fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.values.get(self.pos).copied().unwrap_or(0.0);
            self.pos += 1;
        }
    }
}
