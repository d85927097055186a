use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{mix_seed, EvalResult, Objective};
use crate::error::{Error, Result};
use crate::space::{Configuration, ParamSpec, ParamValue, SearchSpace};
use crate::tuner::TunerParams;

/// Squared distance to a fixed optimum in `[0, 1]^d`, observed with
/// Gaussian noise of variance `alpha * (1/r - 1/r_K)` at resource `r`.
///
/// The top level is exact. Cost is `r * unit_cost`, optionally scaled by a
/// per-configuration factor in `[1, 1 + cost_spread)` to make costs
/// heterogeneous.
#[derive(Debug, Clone)]
pub struct NoisyParaboloid {
    space: SearchSpace,
    optimum: Vec<f64>,
    alpha: f64,
    tuner: TunerParams,
    unit_cost: f64,
    cost_spread: f64,
    resumable: bool,
}

impl NoisyParaboloid {
    /// Optimum at `0.3` in every coordinate.
    pub fn new(d: usize, alpha: f64, tuner: TunerParams) -> Result<Self> {
        Self::with_optimum(vec![0.3; d], alpha, tuner)
    }

    pub fn with_optimum(optimum: Vec<f64>, alpha: f64, tuner: TunerParams) -> Result<Self> {
        if optimum.is_empty() {
            return Err(Error::Setup("paraboloid needs d >= 1".into()));
        }
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::Setup(format!("alpha must be >= 0, got {alpha}")));
        }
        if optimum.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Setup("optimum must lie in [0, 1]^d".into()));
        }
        let params = (0..optimum.len())
            .map(|i| ParamSpec::continuous(format!("x{i}"), 0.0, 1.0, false))
            .collect::<Result<_>>()?;
        Ok(Self {
            space: SearchSpace::new(params)?,
            optimum,
            alpha,
            tuner,
            unit_cost: 1.0,
            cost_spread: 0.0,
            resumable: false,
        })
    }

    pub fn unit_cost(mut self, unit_cost: f64) -> Self {
        self.unit_cost = unit_cost;
        self
    }

    pub fn cost_spread(mut self, spread: f64) -> Self {
        self.cost_spread = spread.max(0.0);
        self
    }

    pub fn resumable(mut self, resumable: bool) -> Self {
        self.resumable = resumable;
        self
    }

    /// Noise variance at `level`.
    pub fn noise_variance(&self, level: usize) -> f64 {
        let r = self.tuner.resource(level) as f64;
        let top = self.tuner.resource(self.tuner.levels()) as f64;
        self.alpha * (1.0 / r - 1.0 / top)
    }

    fn distance(&self, config: &Configuration) -> f64 {
        config
            .values()
            .iter()
            .zip(&self.optimum)
            .map(|(v, o)| match v {
                ParamValue::Real(x) => (x - o) * (x - o),
                _ => 0.0,
            })
            .sum()
    }

    /// Deterministic factor in `[1, 1 + cost_spread)` derived from the
    /// configuration's first coordinate bits.
    fn cost_factor(&self, config: &Configuration) -> f64 {
        if self.cost_spread == 0.0 {
            return 1.0;
        }
        let bits = config.values().iter().fold(0u64, |h, v| match v {
            ParamValue::Real(x) => mix_seed(h, x.to_bits()),
            _ => h,
        });
        1.0 + self.cost_spread * (bits >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl Objective for NoisyParaboloid {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn levels(&self) -> usize {
        self.tuner.levels()
    }

    fn evaluate(&self, config: &Configuration, level: usize, seed: u64) -> EvalResult {
        if self.space.validate(config).is_err() || self.tuner.check_level(level).is_err() {
            return EvalResult::failed(self.unit_cost);
        }
        let var = self.noise_variance(level);
        let noise = if var > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, level as u64));
            Normal::new(0.0, var.sqrt())
                .expect("finite std")
                .sample(&mut rng)
        } else {
            0.0
        };
        EvalResult::ok(
            self.distance(config) + noise,
            self.cost(config, level).expect("declared cost"),
        )
    }

    fn cost(&self, config: &Configuration, level: usize) -> Option<f64> {
        Some(self.tuner.resource(level) as f64 * self.unit_cost * self.cost_factor(config))
    }

    fn resumable(&self) -> bool {
        self.resumable
    }

    fn optimum(&self) -> Option<f64> {
        Some(0.0)
    }

    fn true_value(&self, config: &Configuration) -> Option<f64> {
        Some(self.distance(config))
    }
}
