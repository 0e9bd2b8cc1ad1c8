//! Portable seeded random numbers.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood) with the state
//! initialised to the seed itself. Derived values use only these mappings:
//!
//! * uniform `[0, 1)`: `(next_u64 >> 11) * 2^-53`
//! * uniform `[lo, hi)`: `lo + (hi - lo) * uniform`
//! * standard normal: Box–Muller, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`
//!
//! Any implementation following these rules reproduces the same streams.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: SplitMix64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    /// Stream for a keyed sub-computation, independent of call order elsewhere.
    pub fn keyed(seed: u64, keys: &[u64]) -> Self {
        let mut h = SplitMix64::seed_from_u64(seed);
        let mut state = h.next_u64();
        for k in keys {
            let mut m = SplitMix64::seed_from_u64(state ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            state = m.next_u64();
        }
        Self::new(state)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
