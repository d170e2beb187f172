//! Seeded, splittable random streams.
//!
//! Every random consumer gets its own ChaCha8 stream keyed by
//! `(seed, stream id)`, so adding a new consumer never shifts the draws
//! of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used by the simulator.
pub mod stream {
    pub const ARRIVALS: u64 = 1;
    pub const JOB_SIZES: u64 = 2;
    pub const DUMMY_JOBS: u64 = 3;
    pub const POLICY: u64 = 4;
    pub const AUGMENT_ARRIVALS: u64 = 5;
    pub const GRAPH: u64 = 16;
    pub const RATES: u64 = 17;
}

/// SplitMix64 finalizer; used to turn a parent seed and an index into a child seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. one per replication or per trial.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn substream(seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
