//! Deterministic random streams.
//!
//! Every run is keyed by a single `u64` seed. The seed is expanded with
//! SplitMix64 into a 256-bit ChaCha8 key, and each consumer inside a run
//! draws from its own ChaCha stream id ([`Purpose`]). Streams never share
//! state, so e.g. changing the iteration budget does not perturb the
//! coordinate sequence, and adding noise does not reshuffle sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Coordinate indices, sample ids and Gaussian directions.
    Algorithm = 1,
    /// Oracle corruption draws.
    OracleNoise = 2,
    /// The returned iterate index N(T).
    ReturnIndex = 3,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose as u64);
    rng
}
