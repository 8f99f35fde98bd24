//! Seeded random source shared by every stochastic operation.
//!
//! ChaCha8 is a counter-based stream cipher generator; its output for a
//! given 64-bit seed is identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task without consuming from a
/// parent generator.
pub fn derive(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
