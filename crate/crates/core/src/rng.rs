//! Per-trial random streams.
//!
//! Every random quantity of a trial comes from its own ChaCha stream whose seed
//! is `root_seed ^ mix(trial_index, tag)`, so a trial can be regenerated in
//! isolation and in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random sources inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Activity,
    Pilots,
    Positions,
    RisToBs,
    RisToDevice,
    Noise,
    AmpInit,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Activity => 0x61637476,
            Stream::Pilots => 0x70696c74,
            Stream::Positions => 0x706f7369,
            Stream::RisToBs => 0x67636861,
            Stream::RisToDevice => 0x68636861,
            Stream::Noise => 0x6e6f6973,
            Stream::AmpInit => 0x616d7069,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root_seed: u64, trial_index: u64, stream: Stream) -> u64 {
    root_seed ^ splitmix64(splitmix64(trial_index) ^ stream.tag())
}

pub fn stream_rng(root_seed: u64, trial_index: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root_seed, trial_index, stream))
}
