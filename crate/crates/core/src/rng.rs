//! Seeded random streams.
//!
//! Every stochastic routine takes its generator explicitly. Parallel work derives
//! one ChaCha stream per path from the master seed, so results do not depend on
//! the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for the master seed on stream 0.
pub fn master(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
