//! Reproducible random streams.
//!
//! Every random draw in a protocol run comes from a ChaCha8 stream keyed by the run
//! seed and selected by `(phase, tag)`, so adding draws to one phase never shifts the
//! values seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Phase {
    Channel = 1,
    Packets = 2,
    Generator = 3,
    Reconciliation = 4,
    States = 5,
    Basis = 6,
}

/// Stream for one `(phase, tag)` pair. Tags need only be distinct within a phase.
pub fn stream(seed: u64, phase: Phase, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(((phase as u64) << 56) ^ tag));
    rng
}

/// Child seed for a sub-experiment (a layer, a trial). SplitMix64 finalizer.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    mix(seed ^ mix(salt.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
