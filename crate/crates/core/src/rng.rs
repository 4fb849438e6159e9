//! Seeded random streams.
//!
//! Each consumer of randomness gets its own ChaCha stream derived from the
//! run seed, so turning one mechanism off does not shift the draws seen by
//! the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers.
pub mod stream {
    pub const EXPLORE: u64 = 1;
    pub const LOW_TIES: u64 = 2;
    pub const HIGH_TIES: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const GOALS: u64 = 5;
    pub const EXPLAIN: u64 = 6;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
