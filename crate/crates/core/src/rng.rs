//! Deterministic, splittable random streams.
//!
//! Every stream is a ChaCha8 counter-mode generator keyed from a 64-bit seed.
//! Substreams are keyed by [`derive_seed`], a SplitMix64-style hash of the
//! parent seed and a list of labels, so trials can be scheduled in any order
//! (or concurrently) without changing their draws.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a seed together with an ordered list of labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix(seed), |h, &l| {
        splitmix(h ^ splitmix(l.wrapping_mul(GOLDEN)))
    })
}

#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Substream keyed by `(seed, labels)`; does not touch any other stream.
    pub fn substream(seed: u64, labels: &[u64]) -> Self {
        Self::new(derive_seed(seed, labels))
    }

    /// Child stream seeded from one draw of this stream.
    pub fn fork(&mut self) -> Self {
        Self::new(self.next_u64())
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe to take the logarithm of.
    #[inline]
    pub fn open_unit_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    #[inline]
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.unit_f64() < prob
    }

    /// Uniform integer in `[0, bound)` by widening multiply (bias below 2^-64 * bound).
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Number of failures before the first success of a Bernoulli(`prob`) sequence.
    ///
    /// `ln_complement` must be `ln(1 - prob)`; one draw is consumed.
    #[inline]
    pub fn geometric_gap(&mut self, ln_complement: f64) -> u64 {
        let g = (self.open_unit_f64().ln() / ln_complement).floor();
        if g >= u64::MAX as f64 {
            u64::MAX
        } else {
            g as u64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = SimRng::new(7);
        let mut b = SimRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ_by_label() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(5, &[3, 4]), derive_seed(5, &[3, 4]));
    }

    #[test]
    fn geometric_gap_mean() {
        let mut rng = SimRng::new(11);
        let p: f64 = 0.2;
        let ln_c = (1.0 - p).ln();
        let trials = 200_000;
        let total: u64 = (0..trials).map(|_| rng.geometric_gap(ln_c)).sum();
        let mean = total as f64 / trials as f64;
        // E[failures] = (1-p)/p = 4
        assert!((mean - 4.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SimRng::new(3);
        for _ in 0..10_000 {
            assert!(rng.below(17) < 17);
        }
    }
}
