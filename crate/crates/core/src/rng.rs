//! Seeded random streams.
//!
//! Every random decision in the pipeline flows from one root seed through
//! named substreams, so independent stages (data synthesis, weight init,
//! noise injection, Monte-Carlo sampling) can be re-run or parallelized
//! without perturbing each other.

pub use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// The generator used throughout; ChaCha gives identical streams on every
/// platform for a given seed.
pub type Stream = ChaCha8Rng;

/// Derives named substreams from a root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeder {
    root: u64,
}

impl Seeder {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// A substream identified by a label, e.g. "data", "init", "noise", "mc".
    pub fn stream(&self, label: &str) -> Stream {
        ChaCha8Rng::seed_from_u64(self.derive(label))
    }

    /// A substream further split by an index (per image, per chunk, ...).
    pub fn stream_indexed(&self, label: &str, index: u64) -> Stream {
        let mixed = splitmix(self.derive(label) ^ splitmix(index.wrapping_add(0x9e37_79b9)));
        ChaCha8Rng::seed_from_u64(mixed)
    }

    /// A nested seeder whose streams are all disjoint from the parent's.
    pub fn child(&self, label: &str) -> Seeder {
        Seeder { root: self.derive(label) }
    }

    /// The derived seed itself, for recording in manifests.
    pub fn derived_seed(&self, label: &str, index: u64) -> u64 {
        splitmix(self.derive(label) ^ splitmix(index.wrapping_add(0x9e37_79b9)))
    }

    fn derive(&self, label: &str) -> u64 {
        // FNV-1a over the label, mixed with the root via splitmix.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        splitmix(self.root ^ h)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in [lo, hi).
pub fn uniform<S: Scalar, R: Rng>(rng: &mut R, lo: S, hi: S) -> S {
    let u = S::cst(rng.random::<f64>());
    lo + (hi - lo) * u
}

/// Standard normal via the Marsaglia polar method; computed in f64 and cast,
/// so f32 and f64 pipelines consume the stream identically.
pub fn standard_normal<S: Scalar, R: Rng>(rng: &mut R) -> S {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return S::cst(u * (-2.0 * s.ln() / s).sqrt());
        }
    }
}

/// A vector of i.i.d. N(0, sigma^2) draws.
pub fn normal_vec<S: Scalar, R: Rng>(rng: &mut R, len: usize, sigma: S) -> Vec<S> {
    (0..len).map(|_| standard_normal::<S, _>(rng) * sigma).collect()
}
