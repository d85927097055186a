//! Built-in multi-fidelity objectives and the tabular benchmark loader.

mod counting_ones;
mod paraboloid;
mod tabular;

pub use counting_ones::CountingOnes;
pub use paraboloid::NoisyParaboloid;
pub use tabular::{load_tabular, TabularBenchmark};

use crate::space::{Configuration, SearchSpace};

/// Outcome of one evaluation. `cost_seconds` is always positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub y: f64,
    pub cost_seconds: f64,
    pub failed: bool,
}

impl EvalResult {
    pub fn ok(y: f64, cost_seconds: f64) -> Self {
        Self {
            y,
            cost_seconds,
            failed: false,
        }
    }

    pub fn failed(cost_seconds: f64) -> Self {
        Self {
            y: f64::NAN,
            cost_seconds: cost_seconds.max(MIN_COST),
            failed: true,
        }
    }
}

/// Smallest cost charged for an evaluation.
pub const MIN_COST: f64 = 1e-9;

/// A multi-fidelity function to minimize.
///
/// `evaluate` must be a pure function of `(config, level, seed)` for
/// simulated objectives.
pub trait Objective: Send + Sync {
    fn space(&self) -> &SearchSpace;

    /// Number of resource levels the objective understands.
    fn levels(&self) -> usize;

    fn evaluate(&self, config: &Configuration, level: usize, seed: u64) -> EvalResult;

    /// Declared cost of evaluating `config` at `level` from scratch, if the
    /// objective has a cost model.
    fn cost(&self, _config: &Configuration, _level: usize) -> Option<f64> {
        None
    }

    /// Whether a promoted evaluation can continue from the previous level's
    /// state, paying only the incremental cost.
    fn resumable(&self) -> bool {
        false
    }

    /// Known global minimum, for regret computations.
    fn optimum(&self) -> Option<f64> {
        None
    }

    /// Noise-free full-fidelity value of `config`, when known.
    fn true_value(&self, _config: &Configuration) -> Option<f64> {
        None
    }

    /// Stops any evaluations still running. Called when an experiment ends.
    fn shutdown(&self) {}
}

/// SplitMix64 finalizer; used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
