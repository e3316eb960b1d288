//! Reproducible random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream selected by
//! `(seed, stream index)`, so results do not depend on scheduling order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent generator for trajectory `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
