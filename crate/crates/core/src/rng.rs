//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream derived from
//! the run seed and a fixed stream id, so adding draws to one component never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) mod stream {
    pub const PHOTONS: u64 = 1;
    pub const SPLITTER: u64 = 2;
    pub const DETECTOR_D0: u64 = 3;
    pub const DETECTOR_D1: u64 = 4;
    pub const MARKOV: u64 = 5;
    pub const CALIBRATION: u64 = 6;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; used to derive independent per-job seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
