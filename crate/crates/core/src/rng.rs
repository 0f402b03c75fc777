//! Stream splitting. Every random stream is a ChaCha8 generator keyed by a
//! tuple of integers (root seed, domain tag, task index, episode index, ...).
//! The key is folded through SplitMix64, so any two distinct tuples give
//! independent-looking streams and no stream depends on how many numbers
//! another stream consumed. Serial and parallel runs therefore agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags used as the second key component.
pub mod domain {
    pub const TASKS: u64 = 1;
    pub const EPISODE: u64 = 2;
    pub const DUAL: u64 = 3;
    pub const ROLLOUT: u64 = 4;
    pub const INSTANCE: u64 = 5;
    pub const INIT: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_0F5F_7C0F_0001, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}
