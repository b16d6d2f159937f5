//! Deterministic random streams.
//!
//! Every trial gets its own ChaCha stream selected by the trial index, so
//! results do not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Salt separating the analysis-coin streams from the algorithm streams.
const ANALYSIS_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const BOOTSTRAP_SALT: u64 = 0xc2b2_ae3d_27d4_eb4f;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Independent stream for observation-only coins of trial `trial`.
pub fn analysis_rng(seed: u64, trial: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed ^ ANALYSIS_SALT);
    rng.set_stream(trial);
    rng
}

pub fn bootstrap_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed ^ BOOTSTRAP_SALT)
}
