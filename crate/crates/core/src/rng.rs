//! Deterministic RNG streams keyed by a run seed plus stream indices.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, streams...)`. Different index tuples give
/// unrelated streams, so work can be scheduled in any order.
pub fn stream(seed: u64, streams: &[u64]) -> ChaCha8Rng {
    let mut key = splitmix64(seed);
    for &s in streams {
        key = splitmix64(key ^ splitmix64(s.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(key)
}

/// A child seed for `(seed, streams...)`, e.g. one per scene of a batch.
pub fn derive_seed(seed: u64, streams: &[u64]) -> u64 {
    stream(seed, streams).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
