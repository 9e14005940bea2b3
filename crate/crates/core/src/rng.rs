//! Counter-based stream splitting: every (day, phase, index) triple owns an
//! independent ChaCha stream, so results do not depend on thread scheduling
//! or on how many series were processed before.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Phase {
    Posterior = 1,
    Forecast = 2,
    Simulation = 3,
    Backtest = 4,
    Horizon = 5,
}

const INDEX_BITS: u32 = 20;
const PHASE_BITS: u32 = 4;

/// Generator for `index` (series or draw block) in `phase` on `day`.
pub fn stream(seed: u64, day: u64, phase: Phase, index: usize) -> ChaCha8Rng {
    debug_assert!((index as u64) < (1 << INDEX_BITS));
    debug_assert!(day < (1 << (64 - INDEX_BITS - PHASE_BITS)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((day << (INDEX_BITS + PHASE_BITS)) | ((phase as u64) << INDEX_BITS) | index as u64);
    rng
}
