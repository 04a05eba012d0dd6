//! Named random streams derived from one root seed.
//!
//! Every stage asks for its own stream by name, so changing how much randomness
//! one stage consumes never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Derives the seed of stream `name` under `root`.
pub fn stream_seed(root: u64, name: &str) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a(name.as_bytes())))
}

/// Derives the seed of the `index`-th child of `seed`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn stream(root: u64, name: &str) -> StageRng {
    StageRng::seed_from_u64(stream_seed(root, name))
}

pub fn from_seed(seed: u64) -> StageRng {
    StageRng::seed_from_u64(seed)
}
