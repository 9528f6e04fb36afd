//! Seed derivation. Every random consumer gets its own stream derived from
//! the run seed so that adding a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for [`derive_seed`].
pub mod stream {
    pub const TASK_INIT: u64 = 1;
    pub const MASK_INIT: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const PAIRS: u64 = 4;
    pub const TASK_DROPOUT: u64 = 5;
    pub const MASK_DROPOUT: u64 = 6;
    pub const AUX_INIT: u64 = 7;
}

/// splitmix64 finalizer over `base` and `stream`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
