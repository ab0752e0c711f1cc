//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by a 64-bit
//! seed and a stream id naming its purpose. ChaCha is counter based, so the
//! streams of one seed are independent and each is reproducible on its own:
//! regenerating the offline data never shifts the online noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a random stream is used for. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Kernel = 1,
    Rewards = 2,
    OfflineData = 3,
    AuxDesign = 4,
    Online = 5,
    Rollout = 6,
}

pub fn stream(seed: u64, purpose: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds from a base seed and a counter.
pub fn mix_seed(base: u64, counter: u64) -> u64 {
    let mut z = base ^ counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
