//! Seed hierarchy.
//!
//! Every random stream in the crate is derived from a master seed by
//! [`child`], a SplitMix64-based hash over a path of tags. A stream's seed
//! depends only on its path, never on scheduling, so parallel and serial
//! runs consume identical random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used by the learners and studies.
pub mod tag {
    pub const TASKS: u64 = 0x7461_736b;
    pub const TRAIN: u64 = 0x7472_6e;
    pub const TRANSFER: u64 = 0x7866_72;
    pub const EVAL: u64 = 0x6576_6c;
    pub const SCRATCH: u64 = 0x7363_72;
    pub const KAPPA: u64 = 0x6b70_61;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of the stream at `path` below `parent`.
pub fn child(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(parent: u64, path: &[u64]) -> Rng {
    rng(child(parent, path))
}
