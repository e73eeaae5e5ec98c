//! Seeded, counter-based random streams.
//!
//! Every consumer gets its own ChaCha stream derived from a `(seed, trial,
//! phase)` triple, so parallel trials never share generator state and a run
//! is reproducible from its seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Logical phase of a run. Each phase owns a distinct stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Init = 0,
    FirstLayer = 1,
    SecondLayer = 2,
    Biases = 3,
    TestSet = 4,
    Probe = 5,
    Split = 6,
    Other = 7,
}

/// Generator for stream `(trial, phase)` under `seed`.
pub fn stream(seed: u64, trial: u64, phase: Phase) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(16).wrapping_add(phase as u64));
    rng
}

/// Plain seeded generator on stream 0.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
