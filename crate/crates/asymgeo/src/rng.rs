//! Seeded randomness shared by the builders.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shuffles `items` in place with a generator derived from `seed`.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    items.shuffle(&mut seeded(seed));
}

/// SplitMix64 finalizer; used where a cheap deterministic hash of an id is
/// enough (treap priorities).
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
