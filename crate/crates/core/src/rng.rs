//! Seeded randomness.
//!
//! All randomness flows from a SplitMix64 generator whose state is the seed
//! itself. Independent streams are derived with [`GigRng::stream`], which
//! runs `seed + (id + 1)·0x9E3779B97F4A7C15` through the SplitMix64 output
//! mix. Uniform doubles take the top 53 bits of a draw, normals use the
//! Box–Muller transform, and shuffles are Fisher–Yates from the back. These
//! choices are fixed so that another implementation can replay a dataset
//! from its seed.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct GigRng {
    seed: u64,
    inner: SplitMix64,
}

impl GigRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    /// A generator for sub-stream `id`, independent of how much of `self`
    /// has been consumed.
    pub fn stream(&self, id: u64) -> Self {
        Self::new(mix64(self.seed.wrapping_add(id.wrapping_add(1).wrapping_mul(GOLDEN))))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        mean + std * r * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = GigRng::new(7);
        let mut b = GigRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn splitmix_reference_values() {
        // SplitMix64 seeded with 0 starts 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4.
        let mut r = GigRng::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_do_not_depend_on_consumption() {
        let fresh = GigRng::new(3);
        let mut used = GigRng::new(3);
        used.next_u64();
        assert_eq!(fresh.stream(5).next_u64(), used.stream(5).next_u64());
        assert_ne!(fresh.stream(5).next_u64(), fresh.stream(6).next_u64());
    }

    #[test]
    fn uniform_in_unit_interval_and_below_in_range() {
        let mut r = GigRng::new(11);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn normal_moments_roughly_right() {
        let mut r = GigRng::new(5);
        let xs: Vec<f64> = (0..20_000).map(|_| r.normal(2.0, 0.5)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((mean - 2.0).abs() < 0.02);
        assert!((var.sqrt() - 0.5).abs() < 0.02);
    }
}
