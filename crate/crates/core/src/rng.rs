//! Deterministic seeding.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit seed. Child streams are derived with
//! `child_seed = mix_seed(parent_seed, label)`, where `mix_seed` hashes the
//! label with 64-bit FNV-1a, xors it into the parent and finalizes with the
//! SplitMix64 mixer. The function is part of the reproducibility contract and
//! must not change.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn mix_seed(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ fnv1a(label.as_bytes()))
}

/// Seed for the `index`-th item of a labelled family (trial, vertex, chunk...).
pub fn indexed_seed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(mix_seed(parent, label) ^ splitmix64(index))
}

pub fn child_rng(parent: u64, label: &str) -> Rng {
    rng_from_seed(mix_seed(parent, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn mixing_is_stable() {
        // Frozen values: changing them breaks reproducibility of stored reports.
        assert_eq!(mix_seed(0, ""), splitmix64(0xcbf2_9ce4_8422_2325));
        assert_ne!(mix_seed(7, "a"), mix_seed(7, "b"));
        assert_ne!(mix_seed(7, "a"), mix_seed(8, "a"));
        let mut a = child_rng(42, "trial");
        let mut b = child_rng(42, "trial");
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn indexed_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| indexed_seed(1, "x", i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
