//! The experiment engine.
//!
//! Whenever a worker becomes free the engine forms a job: a promotion if the
//! scheduler allows one, otherwise a fresh configuration in a bracket chosen
//! by the allocator and proposed by the sampler. Completed evaluations are
//! recorded and the allocator and surrogates refreshed before the next job
//! is formed. Experiments run on a simulated clock, where costs come from
//! the objective, or in real time.

mod engine;
mod subprocess;
mod trajectory;

pub use engine::run_experiment;
pub use subprocess::{parse_result, SubprocessObjective};
pub use trajectory::{Trajectory, TrajectoryRecord};

pub use crate::bench::EvalResult;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::Variant;
use crate::store::{ConfigId, MeasurementStore};
use crate::surrogate::SuggestParams;
use crate::tuner::TunerParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Pending-aware expected improvement under the multi-fidelity ensemble.
    Ensemble,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    #[default]
    Simulated,
    Real,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub variant: Variant,
    pub sampler: SamplerKind,
    /// Learn bracket weights; otherwise every fresh job starts in bracket 1
    /// (or at the top level for random search).
    pub bracket_selection: bool,
    pub tuner: TunerParams,
    pub n_workers: usize,
    pub time_budget: f64,
    pub seed: u64,
    pub theta_samples: usize,
    pub round_robin: usize,
    /// Recompute `theta` at least every this many completions.
    pub refresh_every: usize,
    /// Per-worker cost multipliers; empty means all 1.
    pub worker_slowdown: Vec<f64>,
    /// End the run early once a top-level value at or below this is seen.
    pub stop_below: Option<f64>,
    pub suggest: SuggestParams,
    pub clock: Clock,
}

impl EngineConfig {
    /// Defaults per variant: the delayed scheduler gets the ensemble sampler
    /// and bracket selection, every other variant samples at random.
    pub fn new(
        variant: Variant,
        tuner: TunerParams,
        n_workers: usize,
        time_budget: f64,
        seed: u64,
    ) -> Self {
        let full = variant == Variant::Dasha;
        Self {
            variant,
            sampler: if full {
                SamplerKind::Ensemble
            } else {
                SamplerKind::Random
            },
            bracket_selection: full,
            tuner,
            n_workers,
            time_budget,
            seed,
            theta_samples: 100,
            round_robin: 3,
            refresh_every: 10,
            worker_slowdown: Vec::new(),
            stop_below: None,
            suggest: SuggestParams::default(),
            clock: Clock::Simulated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_workers == 0 {
            return Err(Error::Setup("n_workers must be >= 1".into()));
        }
        if self.time_budget.is_nan() || self.time_budget <= 0.0 {
            return Err(Error::Setup(format!(
                "time_budget must be positive, got {}",
                self.time_budget
            )));
        }
        if !self.worker_slowdown.is_empty() && self.worker_slowdown.len() != self.n_workers {
            return Err(Error::Setup(format!(
                "{} worker cost multipliers given for {} workers",
                self.worker_slowdown.len(),
                self.n_workers
            )));
        }
        if self
            .worker_slowdown
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::Setup(
                "worker cost multipliers must be positive".into(),
            ));
        }
        if self.variant.is_synchronous() {
            if self.sampler == SamplerKind::Ensemble {
                return Err(Error::Setup(format!(
                    "variant `{}` supports only the random sampler",
                    self.variant
                )));
            }
            if self.clock == Clock::Real {
                return Err(Error::Setup(format!(
                    "variant `{}` runs only on the simulated clock",
                    self.variant
                )));
            }
        }
        if self.refresh_every == 0 {
            return Err(Error::Setup("refresh_every must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn slowdown(&self, worker: usize) -> f64 {
        self.worker_slowdown.get(worker).copied().unwrap_or(1.0)
    }
}

/// A promotion as it happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromotionRecord {
    pub config_id: ConfigId,
    pub from_level: usize,
    pub time: f64,
    /// `|D_k|` and `|D_{k+1}|` when the decision was made.
    pub d_k: usize,
    pub d_next: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub promotions: Vec<PromotionRecord>,
    /// Worker-seconds spent without a job before the run ended.
    pub idle_time: f64,
    pub completed: usize,
    /// Jobs still running when the budget expired.
    pub discarded: usize,
    pub max_running: usize,
    /// Bracket of every fresh job, in dispatch order.
    pub fresh_brackets: Vec<usize>,
    /// Time of the last processed completion.
    pub end_time: f64,
}

impl RunStats {
    pub fn promotions_from(&self, level: usize) -> usize {
        self.promotions
            .iter()
            .filter(|p| p.from_level == level)
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub store: MeasurementStore,
    pub stats: RunStats,
}
