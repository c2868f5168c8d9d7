//! Seeded random streams.
//!
//! Every run derives its generators from a single `u64` seed. The generator is
//! ChaCha8 (`rand_chacha::ChaCha8Rng`): the key comes from
//! `ChaCha8Rng::seed_from_u64(seed)` and each consumer gets its own ChaCha
//! stream id (see [`Stream`]), so adding draws in one consumer never shifts
//! another consumer's sequence.
//!
//! Environment streams are re-keyed per episode with [`episode_seed`], which
//! mixes the run seed and episode index through SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids. The numeric values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Fires = 1,
    Fading = 2,
    Exploration = 3,
    Init = 4,
    Minibatch = 5,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the environment streams of one episode.
pub fn episode_seed(run_seed: u64, episode: u64) -> u64 {
    splitmix64(run_seed ^ splitmix64(episode))
}
