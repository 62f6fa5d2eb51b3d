//! Seeding conventions.
//!
//! Every random stream in the crate is a ChaCha8 generator (a counter-based
//! stream cipher) created with [`stream`]. Derived seeds are produced with
//! the SplitMix64 finaliser, so a child stream depends only on its parent
//! seed and an index and never on global state. Results are reproducible
//! bit-for-bit within this crate; they are not meant to match any other
//! ecosystem's generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// A generator seeded from a 64-bit value.
pub fn stream(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child stream `index` of `parent`.
///
/// `derive(p, i) = splitmix64(splitmix64(p) ^ splitmix64(i ^ 0xD1B5_4A32_D192_ED03))`
pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index ^ 0xD1B5_4A32_D192_ED03))
}
