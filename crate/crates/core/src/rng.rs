//! Seed derivation.
//!
//! Child streams are derived from a master seed with one SplitMix64 step over
//! `master ^ (stream * GOLDEN)`; stream `i` of master `m` is always the same
//! 64-bit seed, independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = (master ^ stream.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_and_repeat() {
        assert_eq!(split_seed(42, 3), split_seed(42, 3));
        assert_ne!(split_seed(42, 3), split_seed(42, 4));
        assert_ne!(split_seed(42, 0), split_seed(43, 0));
    }
}
