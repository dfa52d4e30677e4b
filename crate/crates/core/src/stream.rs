//! Deterministic, splittable random streams.
//!
//! Every stochastic component consumes an explicit [`RandomStream`]. Streams
//! are identified by a 256-bit key; `split(i)` hashes the parent key with the
//! child index to derive a statistically independent child stream. Because a
//! child's key depends only on the root seed and the split path (never on how
//! much the parent has already generated), results are reproducible across
//! any scheduling of parallel work.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

#[derive(Debug, Clone)]
pub struct RandomStream {
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl RandomStream {
    /// Root stream for a 64-bit experiment seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"uwbsim.stream.v1");
        hasher.update(seed.to_le_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            rng: ChaCha8Rng::from_seed(key),
            key,
        }
    }

    /// Derives the `child`-th independent substream.
    ///
    /// The derivation uses only the stored key, so the same (seed, path)
    /// always yields the same stream regardless of prior draws.
    pub fn split(&self, child: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update(b"/");
        hasher.update(child.to_le_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            rng: ChaCha8Rng::from_seed(key),
            key,
        }
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Exponential draw with the given rate (mean `1/rate`).
    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        let dist = Exp::new(rate)
            .map_err(|_| SimError::config(format!("exponential rate must be positive, got {rate}")))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// Equiprobable +1 / -1.
    pub fn sign(&mut self) -> f64 {
        if self.rng.next_u32() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
