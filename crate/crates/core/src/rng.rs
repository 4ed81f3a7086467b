//! Seeded pseudo-random streams.
//!
//! Every random decision in the toolkit (parameter init, shuffling, patch
//! sampling, synthetic faces, forest bagging) draws from [`SeededRng`], a
//! thin wrapper over xoshiro256** (version 1 of the stream contract):
//!
//! * state is seeded from a `u64` through SplitMix64, exactly as
//!   `Xoshiro256StarStar::seed_from_u64` does;
//! * a uniform `f64` in `[0, 1)` is `(next_u64() >> 11) * 2^-53`;
//! * a bounded integer in `[0, n)` uses rejection sampling on the top bits
//!   (`next_u64() % n` after discarding the biased tail);
//! * shuffling is the descending Fisher–Yates walk (`i = len-1 .. 1`,
//!   swap `i` with `below(i + 1)`).
//!
//! Sub-streams are keyed with [`derive_seed`] so that independent jobs (trees
//! of a forest, folds of a cross validation) never share state.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

pub const RNG_STREAM_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: Xoshiro256StarStar,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n) - 1;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    /// Standard normal draw (Box–Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `count` distinct indices from `0..n` (partial Fisher–Yates), in draw order.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        let count = count.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}

/// Mixes a base seed with a stream key (SplitMix64 finalizer over both).
pub fn derive_seed(base: u64, key: u64) -> u64 {
    let mut z = base ^ key.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
