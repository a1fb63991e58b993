//! Counter-based seed derivation.
//!
//! Every Monte Carlo loop in the crate (permutations, replications) draws its
//! randomness from `(master seed, index)` alone, so results do not depend on
//! the order in which a thread pool schedules the work.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for stream `index` of `master`.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// A 64-bit sub-seed for work item `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    stream_rng(master, index).next_u64()
}
