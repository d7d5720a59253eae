//! Deterministic random substreams.
//!
//! Every random quantity in a simulation is drawn from a ChaCha8 stream keyed
//! by the master seed plus a path of integer tags (trial index, user index,
//! purpose, ...). Streams for different tag paths are independent, so adding
//! trials or users never perturbs the draws of existing ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::C64;

pub type SimRng = ChaCha8Rng;

/// Tags naming what a substream is used for.
pub mod tag {
    pub const CHANNEL: u64 = 1;
    pub const PATHS: u64 = 2;
    pub const SUBARRAY: u64 = 3;
    pub const PRECODER: u64 = 4;
    pub const BITS: u64 = 5;
    pub const NOISE: u64 = 6;
    pub const COLUMN: u64 = 7;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for the substream at `tags` below `seed`.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    let mut key = splitmix64(&mut state);
    for &t in tags {
        let mut s = key ^ t.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        key = splitmix64(&mut s);
    }
    key
}

/// Independent generator for the tag path `tags` below `seed`.
pub fn substream(seed: u64, tags: &[u64]) -> SimRng {
    let mut state = derive_seed(seed, tags);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// One circularly-symmetric complex Gaussian draw with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}
