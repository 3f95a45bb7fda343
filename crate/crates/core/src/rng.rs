//! Seeded random streams.
//!
//! Every random decision in the crate (fold shuffles, noise rows, Gaussian
//! draws, k-means++ sampling) goes through [`seeded`], which returns a
//! xoshiro256++ generator whose state is expanded from the 64-bit seed with
//! SplitMix64. Both algorithms are fully specified, so a given seed produces
//! the same stream on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> StreamRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Derives an independent child seed from a parent seed and a list of labels
/// (dataset name, metric, fold, ...). FNV-1a over the labels, finished with a
/// SplitMix64 round so nearby inputs land far apart.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for part in parts {
        for b in part.as_bytes().iter().chain(std::iter::once(&0xffu8)) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
