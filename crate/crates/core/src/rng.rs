//! Seeded random streams.
//!
//! Every stochastic component draws from its own PCG-64 stream derived from
//! the user seed, so changing e.g. the exploration schedule never perturbs the
//! risk events an episode sees.

use rand_pcg::Pcg64;

pub type PlannerRng = Pcg64;

/// Stream selector passed as the PCG increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Catalog = 1,
    Environment = 2,
    Agent = 3,
    Evaluation = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> PlannerRng {
    let hi = splitmix64(seed);
    let lo = splitmix64(hi ^ seed);
    Pcg64::new((u128::from(hi) << 64) | u128::from(lo), stream as u128)
}

/// A fresh `u64` seed drawn from `stream`, for seeding a component that owns
/// its own stream (e.g. an evaluation environment).
pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    use rand::Rng;
    stream_rng(seed, stream).random()
}

// Spreads small consecutive seeds over the full PCG state.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
