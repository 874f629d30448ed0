//! Deterministic, platform-independent random numbers.
//!
//! The generator is `xorshift64*` (Vigna, 2014): a single 64-bit word of
//! state updated by
//!
//! ```text
//! x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;
//! output = x * 0x2545_F491_4F6C_DD1D   (wrapping)
//! ```
//!
//! Seeds are never used as state directly. They are passed through
//! SplitMix64 first so that nearby seeds give unrelated streams and a zero
//! seed is still valid.
//!
//! Independent streams (spawning, policy sampling, weight init, ...) are
//! derived from one session seed with [`derive_seed`], which mixes the seed
//! with the FNV-1a hash of a purpose tag, and [`derive_indexed`], which
//! additionally mixes an index (episode number, environment slot, run).

use serde::{Deserialize, Serialize};

const XORSHIFT_MULTIPLIER: u64 = 0x2545_F491_4F6C_DD1D;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One SplitMix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a hash of a string.
pub fn fnv1a(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Sub-seed for the stream named `tag`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ fnv1a(tag))
}

/// Sub-seed for the `index`-th member of the stream family named `tag`.
pub fn derive_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, tag) ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let state = splitmix64(seed);
        // xorshift has a fixed point at zero.
        Self {
            state: if state == 0 { FNV_OFFSET } else { state },
        }
    }

    pub fn derived(seed: u64, tag: &str) -> Self {
        Self::new(derive_seed(seed, tag))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(XORSHIFT_MULTIPLIER)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Unbiased (Lemire's multiply-and-reject).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "Rng::below called with n = 0");
        let threshold = n.wrapping_neg() % n;
        loop {
            let product = u128::from(self.next_u64()) * u128::from(n);
            if (product as u64) >= threshold {
                return (product >> 64) as u64;
            }
        }
    }

    pub fn range_f64(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_f64()
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn zero_seed_is_usable() {
        let mut rng = Rng::new(0);
        let draws: Vec<u64> = (0..8).map(|_| rng.next_u64()).collect();
        assert!(draws.iter().any(|&d| d != 0));
    }

    #[test]
    fn known_first_outputs_are_pinned() {
        // Pinned so that a change to the update rule shows up as a failure
        // rather than as silently different simulations.
        let mut rng = Rng::new(7);
        let first = rng.next_u64();
        let second = rng.next_u64();
        let mut reference = splitmix64(7);
        let mut step = || {
            reference ^= reference >> 12;
            reference ^= reference << 25;
            reference ^= reference >> 27;
            reference.wrapping_mul(0x2545_F491_4F6C_DD1D)
        };
        assert_eq!(first, step());
        assert_eq!(second, step());
    }

    #[test]
    fn purpose_tags_separate_streams() {
        let spawn = derive_seed(1, "spawn");
        let policy = derive_seed(1, "policy");
        assert_ne!(spawn, policy);
        assert_ne!(derive_indexed(1, "episode", 0), derive_indexed(1, "episode", 1));
        assert_eq!(derive_indexed(9, "episode", 3), derive_indexed(9, "episode", 3));
    }

    #[test]
    fn unit_interval_bounds() {
        let mut rng = Rng::new(3);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn below_is_roughly_uniform() {
        let mut rng = Rng::new(11);
        let mut counts = [0u32; 5];
        let n = 100_000;
        for _ in 0..n {
            counts[rng.below(5) as usize] += 1;
        }
        let p = 0.2;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 4.0 * sigma, "{counts:?}");
        }
    }
}
