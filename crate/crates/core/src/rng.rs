//! Seeded randomness.
//!
//! Every random decision in the crate flows from a single `u64` seed. Streams
//! are derived with [`derive_seed`] (the SplitMix64 finalizer applied to the
//! parent seed and a stream index) and drawn from xoshiro256** generators, so
//! results are identical across platforms and independent of scheduling.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

pub type Rng = Xoshiro256StarStar;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `index` of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(GOLDEN_GAMMA))
}

/// Generator seeded directly from `seed`.
pub fn rng(seed: u64) -> Rng {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Generator for stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    rng(derive_seed(seed, index))
}
