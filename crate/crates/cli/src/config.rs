//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use hypertune::bench::{load_tabular, CountingOnes, NoisyParaboloid, Objective};
use hypertune::exec::{Clock, EngineConfig, SamplerKind, SubprocessObjective};
use hypertune::scheduler::Variant;
use hypertune::{SearchSpace, TunerParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub n_workers: usize,
    /// Seconds of simulated (or real) time per run.
    pub time_budget: f64,
    /// Value whose first crossing is reported as time-to-target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub worker_cost_multipliers: Vec<f64>,
    #[serde(default)]
    pub clock: Clock,
    pub tuner: TunerParams,
    pub scheduler: SchedulerSection,
    #[serde(default)]
    pub allocator: AllocatorSection,
    pub objective: ObjectiveSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSection {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket_selection: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocatorSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_rounds")]
    pub round_robin_rounds: usize,
}

impl Default for AllocatorSection {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            round_robin_rounds: default_rounds(),
        }
    }
}

fn default_samples() -> usize {
    100
}

fn default_rounds() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    CountingOnes {
        d_cat: usize,
        d_cont: usize,
        #[serde(default = "default_b_base")]
        b_base: u64,
        #[serde(default = "one")]
        unit_cost: f64,
    },
    NoisyParaboloid {
        d: usize,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        optimum: Option<Vec<f64>>,
        #[serde(default = "one")]
        unit_cost: f64,
        #[serde(default)]
        cost_spread: f64,
        #[serde(default)]
        resumable: bool,
    },
    /// Path is relative to the config file.
    Tabular { path: PathBuf },
    Subprocess {
        command: Vec<String>,
        space: SearchSpace,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_seconds: Option<f64>,
        #[serde(default)]
        resumable: bool,
    },
}

fn default_b_base() -> u64 {
    9
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        ensure!(!self.seeds.is_empty(), "`seeds` must not be empty");
        ensure!(self.n_workers >= 1, "`n_workers` must be >= 1");
        ensure!(self.time_budget > 0.0, "`time_budget` must be positive");
        Ok(())
    }

    /// Engine settings for one run. Explicit `sampler` and
    /// `bracket_selection` apply only to the configured variant; others
    /// use their defaults.
    pub fn engine(&self, variant: Variant, seed: u64) -> EngineConfig {
        let mut e = EngineConfig::new(variant, self.tuner, self.n_workers, self.time_budget, seed);
        if variant == self.scheduler.variant {
            if let Some(s) = self.scheduler.sampler {
                e.sampler = s;
            }
            if let Some(b) = self.scheduler.bracket_selection {
                e.bracket_selection = b;
            }
        }
        e.theta_samples = self.allocator.samples;
        e.round_robin = self.allocator.round_robin_rounds;
        e.worker_slowdown = self.worker_cost_multipliers.clone();
        e.clock = self.clock;
        e
    }

    /// Builds the objective; relative paths resolve against `base_dir`.
    pub fn objective(&self, base_dir: &Path) -> Result<Box<dyn Objective>> {
        let t = self.tuner;
        let obj: Box<dyn Objective> = match &self.objective {
            ObjectiveSpec::CountingOnes {
                d_cat,
                d_cont,
                b_base,
                unit_cost,
            } => Box::new(CountingOnes::with_constants(
                *d_cat, *d_cont, t, *b_base, *unit_cost,
            )?),
            ObjectiveSpec::NoisyParaboloid {
                d,
                alpha,
                optimum,
                unit_cost,
                cost_spread,
                resumable,
            } => {
                let base = match optimum {
                    Some(o) => {
                        ensure!(
                            o.len() == *d,
                            "`optimum` has {} entries for d = {d}",
                            o.len()
                        );
                        NoisyParaboloid::with_optimum(o.clone(), *alpha, t)?
                    }
                    None => NoisyParaboloid::new(*d, *alpha, t)?,
                };
                Box::new(
                    base.unit_cost(*unit_cost)
                        .cost_spread(*cost_spread)
                        .resumable(*resumable),
                )
            }
            ObjectiveSpec::Tabular { path } => {
                let table = load_tabular(base_dir.join(path))?;
                if table.levels() != t.levels() {
                    bail!(
                        "table declares {} levels but eta={} and max_resource={} give {}",
                        table.levels(),
                        t.eta(),
                        t.max_resource(),
                        t.levels()
                    );
                }
                Box::new(table)
            }
            ObjectiveSpec::Subprocess {
                command,
                space,
                timeout_seconds,
                resumable,
            } => {
                let timeout = timeout_seconds
                    .map(Duration::try_from_secs_f64)
                    .transpose()
                    .context("invalid timeout_seconds")?;
                Box::new(
                    SubprocessObjective::new(space.clone(), t, command.clone())?
                        .timeout(timeout)
                        .resumable(*resumable),
                )
            }
        };
        Ok(obj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
output_dir = "out"
seeds = [1, 2]
n_workers = 4
time_budget = 100.0

[tuner]
eta = 3
max_resource = 27

[scheduler]
variant = "dasha"

[objective]
kind = "noisy_paraboloid"
d = 2
alpha = 0.5
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.allocator, AllocatorSection::default());
        assert_eq!(c.clock, Clock::Simulated);
        let e = c.engine(Variant::Dasha, 1);
        assert_eq!(e.sampler, SamplerKind::Ensemble);
        assert!(e.bracket_selection);
        assert_eq!(c.engine(Variant::Sha, 1).sampler, SamplerKind::Random);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = MINIMAL.replace("n_workers = 4", "n_workers = 4\nworkers = 2");
        let e = format!("{:#}", ExperimentConfig::parse(&bad).unwrap_err());
        assert!(e.contains("workers"), "{e}");
        let bad = MINIMAL.replace("alpha = 0.5", "alpha = 0.5\nbeta = 1");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn subprocess_space_parses() {
        let text = MINIMAL.replace(
            "kind = \"noisy_paraboloid\"\nd = 2\nalpha = 0.5\n",
            r#"kind = "subprocess"
command = ["python3", "train.py", "--lr", "{lr}"]
timeout_seconds = 60.0
space = [
  { name = "lr", kind = "continuous", lower = 1e-4, upper = 1.0, log_scale = true },
  { name = "opt", kind = "categorical", choices = ["sgd", "adam"] },
]
"#,
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let obj = c.objective(Path::new(".")).unwrap();
        assert_eq!(obj.space().dim(), 2);
        let again = ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::parse(&MINIMAL.replace("seeds = [1, 2]", "seeds = []")).is_err());
        assert!(ExperimentConfig::parse(
            &MINIMAL.replace("schema_version = 1", "schema_version = 2")
        )
        .is_err());
        let e = format!(
            "{:#}",
            ExperimentConfig::parse(&MINIMAL.replace("variant = \"dasha\"", "variant = \"x\""))
                .unwrap_err()
        );
        assert!(e.contains("dasha"), "{e}");
    }
}
