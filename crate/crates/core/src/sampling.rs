//! Seeded random variates.
//!
//! Every random choice in a run draws from an [`RngStream`]: a ChaCha8
//! generator keyed by SHA-256 of the master seed and a stream label. Streams
//! with different labels never share state, so adding draws to one stage of
//! the simulation cannot shift the variates seen by another.
//!
//! Persona parameters follow the round-then-clamp convention: a continuous
//! draw is rounded half away from zero and then saturated into the integer
//! range. Depth uses Erlang with shape 3 and *rate* 1 (mean 3).

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use sha2::{Digest, Sha256};

use crate::model::SearchParams;

pub const ATTENTION_MEAN: f64 = 5.0;
pub const ATTENTION_SD: f64 = 1.0;
pub const ERLANG_SHAPE: u32 = 3;
pub const ERLANG_RATE: f64 = 1.0;

/// A labeled, independently keyed random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        RngStream {
            seed,
            label,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// A child stream; `derive("7")` on `query_select` yields `query_select/7`.
    pub fn derive(&self, sublabel: impl AsRef<str>) -> Self {
        RngStream::new(self.seed, format!("{}/{}", self.label, sublabel.as_ref()))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// `k` distinct indices from `0..n` in sampled order (`k` is capped at `n`).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        index::sample(&mut self.rng, n, k.min(n)).into_vec()
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        order
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Round half away from zero, then clamp into `[lo, hi]`.
pub fn round_clamp(x: f64, lo: i64, hi: i64) -> i64 {
    debug_assert!(lo <= hi);
    // f64::round is half-away-from-zero; the float clamp avoids overflow on casts.
    x.round().clamp(lo as f64, hi as f64) as i64
}

pub fn sample_normal_clamped(mean: f64, sd: f64, lo: i64, hi: i64, rng: &mut RngStream) -> i64 {
    assert!(sd > 0.0, "standard deviation must be positive");
    let normal = Normal::new(mean, sd).expect("finite normal parameters");
    round_clamp(normal.sample(rng), lo, hi)
}

/// Sum of `shape` exponential draws, rounded and clamped.
pub fn sample_erlang_clamped(shape: u32, rate: f64, lo: i64, hi: i64, rng: &mut RngStream) -> i64 {
    assert!(shape >= 1, "shape must be at least 1");
    let exp = Exp::new(rate).expect("positive rate");
    let draws: Vec<f64> = (0..shape).map(|_| exp.sample(rng)).collect();
    erlang_from_draws(&draws, lo, hi)
}

/// The deterministic tail of [`sample_erlang_clamped`], split out so the
/// rounding rule can be checked on fixed exponential draws.
pub fn erlang_from_draws(exponential_draws: &[f64], lo: i64, hi: i64) -> i64 {
    round_clamp(exponential_draws.iter().sum(), lo, hi)
}

/// Draws attention, range and depth, in that order.
pub fn assign_parameters(rng: &mut RngStream) -> SearchParams {
    let attention = sample_normal_clamped(ATTENTION_MEAN, ATTENTION_SD, 1, 10, rng);
    let range = sample_normal_clamped(ATTENTION_MEAN, ATTENTION_SD, 1, 10, rng);
    let depth = sample_erlang_clamped(ERLANG_SHAPE, ERLANG_RATE, 0, 6, rng);
    SearchParams {
        attention: attention as u8,
        range: range as u8,
        depth: depth as u8,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_round_clamp_examples() {
        assert_eq!(round_clamp(5.0, 1, 10), 5);
        assert_eq!(round_clamp(11.3, 1, 10), 10);
        assert_eq!(round_clamp(0.2, 1, 10), 1);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_clamp(4.5, 0, 10), 5);
        assert_eq!(round_clamp(-0.5, -5, 5), -1);
        assert_eq!(round_clamp(2.4999, 0, 10), 2);
    }

    #[test]
    fn erlang_round_clamp_examples() {
        assert_eq!(erlang_from_draws(&[0.5, 0.5, 0.5], 0, 6), 2);
        assert_eq!(erlang_from_draws(&[7.2], 0, 6), 6);
        assert_eq!(erlang_from_draws(&[0.3], 0, 6), 0);
    }

    #[test]
    fn streams_are_reproducible() {
        let mut a = RngStream::new(42, "persona");
        let mut b = RngStream::new(42, "persona");
        let xs: Vec<u64> = (0..32).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..32).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn labels_separate_streams() {
        let mut a = RngStream::new(42, "persona");
        let mut b = RngStream::new(42, "thread_select");
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
        assert_eq!(a.derive("3").label(), "persona/3");
    }

    #[test]
    fn sampled_indices_are_distinct() {
        let mut rng = RngStream::new(1, "t");
        let idx = rng.sample_indices(10, 4);
        assert_eq!(idx.len(), 4);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert_eq!(rng.sample_indices(2, 5).len(), 2);
    }

    #[test]
    fn parameters_within_bounds() {
        let mut rng = RngStream::new(7, "persona");
        for _ in 0..10_000 {
            assert!(assign_parameters(&mut rng).in_bounds());
        }
    }
}
