//! Random streams. Every generator draws from ChaCha8 seeded by the 64-bit
//! simulation seed, with a distinct stream id per purpose, so adding a consumer
//! never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_BROWNIAN: u64 = 1;
pub const STREAM_JUMP_TIMES: u64 = 2;
pub const STREAM_JUMP_SIZES: u64 = 3;
pub const STREAM_SECOND_DRIVER: u64 = 4;
pub const STREAM_FBM: u64 = 5;
pub const STREAM_REGIMES: u64 = 6;
pub const STREAM_BRIDGE_BASE: u64 = 64;

pub fn stream(seed: u64, id: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}
