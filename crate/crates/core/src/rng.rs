//! Counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha20 stream addressed by
//! `(master_seed, trial_id, step_index)`:
//!
//! * the 256-bit key is the little-endian `master_seed` followed by zeros,
//! * the 64-bit stream id is `trial_id`,
//! * the stream starts at word position `step_index << STEP_SHIFT`.
//!
//! A step therefore owns a window of `2^STEP_SHIFT` 32-bit words and no two
//! `(trial, step)` pairs share keystream. Because a stream is a pure function
//! of its address, trials can be evaluated in any order or on any number of
//! threads with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Log2 of the keystream words reserved for one sequence step.
pub const STEP_SHIFT: u32 = 40;

/// Address of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamAddress {
    pub master_seed: u64,
    pub trial_id: u64,
    pub step_index: u32,
}

impl StreamAddress {
    pub fn new(master_seed: u64, trial_id: u64, step_index: u32) -> Self {
        Self { master_seed, trial_id, step_index }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        stream(self.master_seed, self.trial_id, self.step_index)
    }
}

/// Opens the stream for `(master_seed, trial_id, step_index)`.
pub fn stream(master_seed: u64, trial_id: u64, step_index: u32) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(trial_id);
    rng.set_word_pos((step_index as u128) << STEP_SHIFT);
    rng
}
