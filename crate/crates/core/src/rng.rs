//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream addressed by
//! `(seed, stream id, step)`: the stream id selects the ChaCha stream and
//! the step selects a disjoint block of the keystream. A draw therefore
//! depends only on its address, never on how many numbers other agents or
//! earlier steps consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::DroneId;

/// Keystream words reserved per step. A step consumes a handful of words.
const WORDS_PER_STEP: u128 = 1 << 20;

const SNAPSHOT_STREAM: u64 = u64::MAX;
const SCENE_STREAM: u64 = u64::MAX - 1;
const STUDY_STREAM: u64 = u64::MAX - 2;

/// Random streams for one world instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream used by drone `drone` when deciding at step `t`.
    pub fn agent(&self, drone: DroneId, t: u64) -> ChaCha8Rng {
        self.at(u64::from(drone.0), t)
    }

    /// Stream used for sensor estimation noise when snapshotting at step `t`.
    pub fn snapshot(&self, t: u64) -> ChaCha8Rng {
        self.at(SNAPSHOT_STREAM, t)
    }

    /// Stream for scene generation.
    pub fn scene(&self) -> ChaCha8Rng {
        self.at(SCENE_STREAM, 0)
    }

    /// Stream for experiment-design draws such as sampled start times.
    pub fn study(&self) -> ChaCha8Rng {
        self.at(STUDY_STREAM, 0)
    }

    fn at(&self, stream: u64, t: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(t) * WORDS_PER_STEP);
        rng
    }
}

/// Seed of the twin's agent streams when behaviour randomness diverges.
pub fn divergent_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Seed for repeat `repeat` of an experiment with base seed `base`.
pub fn repeat_seed(base: u64, repeat: u32) -> u64 {
    base.wrapping_add(u64::from(repeat).wrapping_mul(1_000_003))
}
