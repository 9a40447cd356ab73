//! Counter-addressed random streams.
//!
//! Every draw is addressed by `(master_seed, stream, index, slot)`: the
//! ChaCha key is built from the master seed and stream tag, the ChaCha
//! stream id is the path index, and the word position is derived from the
//! slot. Draws are therefore pure functions of their address, independent of
//! generation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent purposes that consume randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    BrownianX = 1,
    BrownianY = 2,
    TaggedTerminal = 3,
    TaggedInitial = 4,
    OrdinaryInitial = 5,
    Spike = 6,
}

/// Words reserved per slot; the normal sampler's rejection loop stays far
/// inside this budget with overwhelming probability.
const SLOT_WORDS: u128 = 64;

pub struct CounterRng {
    rng: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(master_seed: u64, stream: Stream, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        CounterRng { rng }
    }

    /// Standard normal draw at `slot`.
    pub fn normal(&mut self, slot: u64) -> f64 {
        self.rng.set_word_pos(slot as u128 * SLOT_WORDS);
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw on `[0, 1)` at `slot`.
    pub fn uniform(&mut self, slot: u64) -> f64 {
        use rand::Rng;
        self.rng.set_word_pos(slot as u128 * SLOT_WORDS);
        self.rng.random::<f64>()
    }
}
