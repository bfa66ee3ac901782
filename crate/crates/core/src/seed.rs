//! Seed handling shared by the CLI and library drivers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random source used everywhere in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th item of a batch. Results stay independent of how
/// items are spread over workers.
pub fn derive_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}
