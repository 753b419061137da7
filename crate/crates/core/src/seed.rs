//! Stable seed derivation.
//!
//! Seeds must not depend on the platform or on `core::hash` implementations,
//! so the string hash is FNV-1a (64 bit) and integer mixing is SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// One SplitMix64 step. Used to decorrelate seeds that differ in a few bits.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the leave-one-out model that holds out `id`.
pub fn for_holdout(master: u64, id: &str) -> u64 {
    master ^ fnv1a64(id.as_bytes())
}

/// Seed for fold `index` of a K-fold run.
pub fn for_fold(master: u64, index: usize) -> u64 {
    mix(master.wrapping_add(index as u64))
}

/// Seed for a named sub-stream (e.g. "split", "detector").
pub fn for_stream(master: u64, stream: &str) -> u64 {
    mix(master ^ fnv1a64(stream.as_bytes()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn fold_seeds_differ() {
        assert_ne!(for_fold(0, 0), for_fold(0, 1));
        assert_eq!(for_fold(7, 3), for_fold(7, 3));
    }
}
