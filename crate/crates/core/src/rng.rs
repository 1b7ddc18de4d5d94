//! Seed derivation. Every stochastic component draws from its own ChaCha
//! stream so that changing one component (say, the weighting variant) leaves
//! the random numbers seen by the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named streams derived from a run's master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    Mobility = 2,
    Channel = 3,
    NetInit = 4,
    Exploration = 5,
    Replay = 6,
    ActorNoise = 7,
    EvalEnv = 8,
    TrainEnv = 9,
}

/// A generator for `stream`, seeded by `seed` and sub-indexed by `index`
/// (for example the episode number).
pub fn stream(seed: u64, stream: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, index));
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer over (seed, index).
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
