//! Seeded RNG substreams.
//!
//! All randomness in the pipeline flows from one user-visible seed through
//! named substreams, so changing e.g. the shuffle order never perturbs the
//! dataset or the weight init.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_DATASET: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_SHUFFLE: u64 = 3;

/// Independent deterministic stream for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-shot stream: schedule-independent regardless of generation order.
pub fn shot_stream(seed: u64, shot_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // high bits keep shot streams disjoint from the named streams above
    rng.set_stream((STREAM_DATASET << 56) | shot_index);
    rng
}
