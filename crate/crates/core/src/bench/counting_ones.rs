use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{mix_seed, EvalResult, Objective};
use crate::error::{Error, Result};
use crate::space::{Configuration, ParamSpec, ParamValue, SearchSpace};
use crate::tuner::TunerParams;

/// Counting-ones: `d_cat` binary categoricals plus `d_cont` continuous
/// parameters in `[0, 1]`. The full-fidelity value is
/// `-(sum of categoricals + sum of continuous values) / d`.
///
/// Below the top level each continuous term is replaced by the mean of
/// `b_i = eta^(i-1) * b_base` Bernoulli draws with that success probability.
/// Evaluation cost is `(b_i * d_cont + d_cat) * unit_cost`.
#[derive(Debug, Clone)]
pub struct CountingOnes {
    space: SearchSpace,
    d_cat: usize,
    d_cont: usize,
    tuner: TunerParams,
    b_base: u64,
    unit_cost: f64,
}

impl CountingOnes {
    pub fn new(d_cat: usize, d_cont: usize, tuner: TunerParams) -> Result<Self> {
        Self::with_constants(d_cat, d_cont, tuner, 9, 1.0)
    }

    pub fn with_constants(
        d_cat: usize,
        d_cont: usize,
        tuner: TunerParams,
        b_base: u64,
        unit_cost: f64,
    ) -> Result<Self> {
        if d_cat + d_cont == 0 {
            return Err(Error::Setup(
                "counting-ones needs at least one dimension".into(),
            ));
        }
        if b_base == 0 || unit_cost <= 0.0 {
            return Err(Error::Setup("b_base and unit_cost must be positive".into()));
        }
        let mut params = Vec::with_capacity(d_cat + d_cont);
        for i in 0..d_cat {
            params.push(ParamSpec::categorical(format!("cat{i}"), ["0", "1"])?);
        }
        for i in 0..d_cont {
            params.push(ParamSpec::continuous(format!("cont{i}"), 0.0, 1.0, false)?);
        }
        Ok(Self {
            space: SearchSpace::new(params)?,
            d_cat,
            d_cont,
            tuner,
            b_base,
            unit_cost,
        })
    }

    /// Bernoulli draws per continuous term at `level`.
    pub fn draws(&self, level: usize) -> u64 {
        self.tuner.resource(level) * self.b_base
    }

    fn split<'a>(&self, config: &'a Configuration) -> (f64, impl Iterator<Item = f64> + 'a) {
        let values = config.values();
        let cats = values[..self.d_cat]
            .iter()
            .map(|v| match v {
                ParamValue::Choice(c) => *c as f64,
                _ => 0.0,
            })
            .sum();
        let conts = values[self.d_cat..].iter().map(|v| match v {
            ParamValue::Real(p) => *p,
            _ => 0.0,
        });
        (cats, conts)
    }
}

impl Objective for CountingOnes {
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
        let d = (self.d_cat + self.d_cont) as f64;
        let (cats, conts) = self.split(config);
        let cont_sum: f64 = if level == self.tuner.levels() {
            conts.sum()
        } else {
            let b = self.draws(level);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, level as u64));
            conts
                .map(|p| {
                    Binomial::new(b, p).expect("p in [0, 1]").sample(&mut rng) as f64 / b as f64
                })
                .sum()
        };
        let cost = self.cost(config, level).expect("declared cost");
        EvalResult::ok(-(cats + cont_sum) / d, cost)
    }

    fn cost(&self, _config: &Configuration, level: usize) -> Option<f64> {
        Some((self.draws(level) * self.d_cont as u64 + self.d_cat as u64) as f64 * self.unit_cost)
    }

    fn optimum(&self) -> Option<f64> {
        Some(-1.0)
    }

    fn true_value(&self, config: &Configuration) -> Option<f64> {
        let (cats, conts) = self.split(config);
        Some(-(cats + conts.sum::<f64>()) / (self.d_cat + self.d_cont) as f64)
    }
}
