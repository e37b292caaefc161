//! Portable seeded random streams with label-based splitting.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Name and version recorded in run summaries.
pub const RNG_NAME: &str = "chacha8-sha256split";
pub const RNG_VERSION: u32 = 1;

/// A ChaCha8 stream keyed by SHA-256 of its parent key and a label.
///
/// `split` depends only on the key, never on how much of the stream was
/// consumed, so child streams are independent of call order.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u8; 32],
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(b"root");
        Self::from_key(h.finalize().into())
    }

    fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn split(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(label.as_bytes());
        Self::from_key(h.finalize().into())
    }

    /// Rewinds to the start of this stream.
    pub fn restart(&mut self) {
        self.inner = ChaCha8Rng::from_seed(self.key);
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Index drawn by inverse CDF over `weights` (need not be normalized).
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        inverse_cdf(weights, self.uniform())
    }
}

/// Maps a uniform draw `u ∈ [0,1)` to an index by inverse CDF, skipping zero-weight entries.
pub fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return i;
        }
    }
    last.expect("inverse_cdf needs a positive weight")
}
