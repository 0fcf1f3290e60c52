//! Seeded random streams.
//!
//! One global seed feeds every stochastic component. Each component draws
//! from its own ChaCha stream (same key, distinct stream id), so adding draws
//! in one place never shifts another component's sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diff::Tensor;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    Exploration = 2,
    Encoder = 3,
    Mask = 4,
    Init = 5,
    Replay = 6,
    Eval = 7,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    substream(seed, which as u64)
}

pub fn substream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Number of 64-bit words in a saved stream state.
pub const STATE_WORDS: usize = 7;

/// Key, stream id and word position, packed into little-endian words.
pub fn save_state(rng: &StreamRng) -> [u64; STATE_WORDS] {
    let seed = rng.get_seed();
    let mut out = [0u64; STATE_WORDS];
    for (i, chunk) in seed.chunks(8).enumerate() {
        out[i] = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    out[4] = rng.get_stream();
    let pos = rng.get_word_pos();
    out[5] = pos as u64;
    out[6] = (pos >> 64) as u64;
    out
}

pub fn restore_state(words: &[u64]) -> Option<StreamRng> {
    if words.len() != STATE_WORDS {
        return None;
    }
    let mut seed = [0u8; 32];
    for i in 0..4 {
        seed[i * 8..(i + 1) * 8].copy_from_slice(&words[i].to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(words[4]);
    rng.set_word_pos(u128::from(words[5]) | (u128::from(words[6]) << 64));
    Some(rng)
}

/// Uniform initialisation in `[-bound, bound)`.
pub fn uniform_tensor(rng: &mut StreamRng, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches generated data")
}
