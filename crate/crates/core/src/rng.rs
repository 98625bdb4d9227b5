//! Seeding conventions.
//!
//! Every random stream is a [`ChaCha8Rng`] seeded through
//! [`SeedableRng::seed_from_u64`]. Child seeds are derived from a parent seed
//! and a path of integer tags by folding each tag through a SplitMix64
//! finalizer, so `derive_seed(root, &[n, instance])` names a stream
//! independently of how many other streams were drawn before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(parent), |acc, &tag| {
        splitmix64(acc ^ splitmix64(tag))
    })
}
