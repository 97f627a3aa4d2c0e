//! Seeded randomness shared by every sampler in the crate.
//!
//! The uniform stream comes from ChaCha8, whose output is specified
//! bit-for-bit, so seeds are portable across platforms and builds. Normal
//! draws use Box–Muller on that stream; the second variate of each pair is
//! cached and returned by the next call.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

/// Deterministic random source for `seed`.
pub fn make_rng(seed: u64) -> RandomSource {
    RandomSource::from_seed(seed)
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Independent child stream, derived deterministically from this one.
    pub fn fork(&mut self) -> RandomSource {
        RandomSource::from_seed(self.rng.next_u64())
    }
}
