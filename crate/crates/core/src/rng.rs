//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 generator (`rand_chacha` 0.9, whose output is
//! stable across releases) seeded from a 64-bit key. Keys for parallel work
//! are derived by hashing the base seed together with the work coordinates,
//! so a replication's draws never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Name recorded in output metadata; bump when the derivation changes.
pub const GENERATOR: &str = "chacha20/splitmix-v1";

pub type StreamRng = ChaCha20Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with any number of stream coordinates.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(base), |h, &c| splitmix64(h ^ splitmix64(c)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_order_sensitive_and_stable() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[2]), derive_seed(2, &[2]));
    }

    #[test]
    fn streams_are_deterministic() {
        let a: Vec<u64> = stream(7).random_iter().take(4).collect();
        let b: Vec<u64> = stream(7).random_iter().take(4).collect();
        assert_eq!(a, b);
    }
}
