//! Seed derivation shared by every simulation.
//!
//! All randomness comes from ChaCha8 keyed by the run seed. Independent units
//! of work (a tree, a trial, a matrix, a block of samples) each own one ChaCha
//! stream selected by their index, so results do not depend on how the units
//! are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for work unit `unit` of a run seeded with `seed`.
pub fn unit_rng(seed: u64, unit: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit);
    rng
}

/// Derives a child seed so nested experiments (e.g. one per stopping
/// sequence) do not share streams with their parent.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
