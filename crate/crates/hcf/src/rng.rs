//! Named, splittable random streams.
//!
//! Every stochastic operation in this crate takes an explicit stream handle;
//! there is no global RNG state. Child streams are derived by hashing the
//! parent key with a label, so the draws of a stream depend only on the root
//! seed and the path of labels that produced it — never on how many values a
//! sibling stream has consumed. This makes parallel use (one stream per
//! trajectory, per window, per sample) order-independent and reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug)]
pub struct StreamRng {
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl StreamRng {
    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"hcf.stream.root");
        h.update(seed.to_le_bytes());
        Self::from_key(h.finalize().into())
    }

    fn from_key(key: [u8; 32]) -> Self {
        StreamRng {
            key,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Derive a child stream. Splitting reads only the key, not the
    /// generator state, so it is unaffected by draws made on `self`.
    pub fn split(&self, label: &str) -> StreamRng {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update([0x01]);
        h.update(label.as_bytes());
        Self::from_key(h.finalize().into())
    }

    /// Derive a child stream by index (for per-trajectory fan-out).
    pub fn split_index(&self, index: u64) -> StreamRng {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update([0x02]);
        h.update(index.to_le_bytes());
        Self::from_key(h.finalize().into())
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Uniform index in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }

    /// Exponential draw with the given rate (events per unit time).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        Exp::new(rate)
            .expect("rate must be positive")
            .sample(&mut self.rng)
    }
}
