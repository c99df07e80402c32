//! Reproducible random streams.
//!
//! Every stochastic routine draws from ChaCha8 keyed by a master seed, with
//! the 64-bit stream id built from an experiment tag and a replicate index.
//! ChaCha is counter based, so streams are independent of how replicates are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for replicate `index` of experiment `tag` under `seed`.
pub fn stream(seed: u64, tag: u32, index: u32) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 32) | index as u64);
    rng
}

/// Experiment tags. Distinct tags keep streams disjoint when one seed drives
/// several experiments.
pub mod tags {
    pub const BOOTSTRAP: u32 = 1;
    pub const BIAS: u32 = 2;
    pub const NORMALITY: u32 = 3;
    pub const MEDIAN_GAP: u32 = 4;
    pub const VERVAAT: u32 = 5;
    pub const AR1: u32 = 6;
    pub const PILOT: u32 = 7;
    pub const FUZZ: u32 = 8;
    pub const KS_SANITY: u32 = 9;
}
