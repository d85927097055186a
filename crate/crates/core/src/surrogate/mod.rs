//! Per-level base surrogates, the weighted multi-fidelity ensemble, expected
//! improvement, and pending-aware configuration sampling.

mod forest;
mod sampler;

pub use forest::{ForestParams, RandomForest};
pub use sampler::{suggest, suggest_with, PendingSet, SuggestParams};

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};
use crate::store::Measurement;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Something that maps an encoded configuration to a prediction, or `None`
/// when it has not been fitted.
pub trait Predictor {
    fn predict(&self, x: &[f64]) -> Option<Prediction>;

    fn is_fitted(&self) -> bool;
}

/// Surrogate `M_i` trained on the measurements of one resource level.
#[derive(Debug, Clone)]
pub struct BaseSurrogate {
    level: usize,
    model: Option<RandomForest>,
    fingerprint: u64,
}

impl BaseSurrogate {
    pub fn unfit(level: usize) -> Self {
        Self {
            level,
            model: None,
            fingerprint: 0,
        }
    }

    /// Fits on encoded rows. Fewer than two rows or a constant target yields
    /// an unfit surrogate.
    pub fn fit(level: usize, x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Self {
        let fingerprint = fingerprint(x, y);
        let degenerate = y.len() < 2 || y.iter().all(|v| *v == y[0]);
        Self {
            level,
            model: (!degenerate).then(|| RandomForest::fit(x, y, params, seed)),
            fingerprint,
        }
    }

    /// Fits on the successful measurements among `data`.
    pub fn fit_measurements<'a>(
        space: &SearchSpace,
        level: usize,
        data: impl IntoIterator<Item = &'a Measurement>,
        params: &ForestParams,
        seed: u64,
    ) -> Self {
        let (x, y) = training_rows(space, data);
        Self::fit(level, &x, &y, params, seed)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

impl Predictor for BaseSurrogate {
    fn predict(&self, x: &[f64]) -> Option<Prediction> {
        self.model.as_ref().map(|m| m.predict(x))
    }

    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }
}

pub(crate) fn training_rows<'a>(
    space: &SearchSpace,
    data: impl IntoIterator<Item = &'a Measurement>,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    data.into_iter()
        .filter(|m| !m.failed)
        .map(|m| {
            let mut row = Vec::with_capacity(space.encoded_dim());
            space.encode_into(&m.config, &mut row);
            (row, m.y)
        })
        .unzip()
}

/// FNV-1a over the bit patterns of the training set.
pub(crate) fn fingerprint(x: &[Vec<f64>], y: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(y.len() as u64);
    for (row, t) in x.iter().zip(y) {
        row.iter().for_each(|v| eat(v.to_bits()));
        eat(t.to_bits());
    }
    h
}

/// The multi-fidelity ensemble `M_MF`: base surrogates combined with
/// weights `theta`.
#[derive(Debug, Clone)]
pub struct EnsembleSurrogate<P = BaseSurrogate> {
    bases: Vec<P>,
    theta: Vec<f64>,
}

impl<P: Predictor> EnsembleSurrogate<P> {
    pub fn new(bases: Vec<P>, theta: Vec<f64>) -> Result<Self> {
        if bases.len() != theta.len() || bases.is_empty() {
            return Err(Error::Setup(format!(
                "{} bases but {} weights",
                bases.len(),
                theta.len()
            )));
        }
        check_probability_vector(&theta)?;
        Ok(Self { bases, theta })
    }

    pub fn bases(&self) -> &[P] {
        &self.bases
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: Vec<f64>) -> Result<()> {
        if theta.len() != self.bases.len() {
            return Err(Error::Setup("weight vector length mismatch".into()));
        }
        check_probability_vector(&theta)?;
        self.theta = theta;
        Ok(())
    }

    pub fn set_base(&mut self, level: usize, base: P) {
        self.bases[level - 1] = base;
    }

    /// Predictive mean `sum theta_i mu_i` and variance
    /// `sum theta_i^2 sigma_i^2`, with weights renormalized over fitted
    /// bases.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.predict_replacing(x, None)
    }

    /// Like [`predict`](Self::predict) but with base `level` swapped for
    /// `replacement`.
    pub fn predict_replacing(
        &self,
        x: &[f64],
        replacement: Option<(usize, &P)>,
    ) -> Result<Prediction> {
        let preds: Vec<Option<Prediction>> = self
            .bases
            .iter()
            .enumerate()
            .map(|(i, b)| match replacement {
                Some((level, r)) if level == i + 1 => r.predict(x),
                _ => b.predict(x),
            })
            .collect();
        combine(&self.theta, &preds)
    }

    pub fn has_usable_base(&self) -> bool {
        self.usable_with(None)
    }

    pub(crate) fn usable_with(&self, replacement: Option<(usize, &P)>) -> bool {
        self.bases.iter().enumerate().any(|(i, b)| {
            let fitted = match replacement {
                Some((level, r)) if level == i + 1 => r.is_fitted(),
                _ => b.is_fitted(),
            };
            fitted && self.theta[i] > 0.0
        })
    }
}

/// Weighted combination of per-level predictions. `preds[i]` is `None` for
/// unfit bases; their weight is dropped and the rest renormalized.
pub fn combine(theta: &[f64], preds: &[Option<Prediction>]) -> Result<Prediction> {
    let total: f64 = theta
        .iter()
        .zip(preds)
        .filter(|(_, p)| p.is_some())
        .map(|(t, _)| *t)
        .sum();
    if total <= 0.0 {
        return Err(Error::ColdStart);
    }
    let mut mean = 0.0;
    let mut variance = 0.0;
    for (t, p) in theta.iter().zip(preds) {
        if let Some(p) = p {
            let w = if total == 1.0 { *t } else { t / total };
            mean += w * p.mean;
            variance += w * w * p.variance;
        }
    }
    Ok(Prediction { mean, variance })
}

pub(crate) fn check_probability_vector(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Setup(format!("weights must be non-negative: {v:?}")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Setup(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Expected improvement below `best_y` (minimization).
pub fn expected_improvement(pred: &Prediction, best_y: f64) -> f64 {
    let sigma = pred.std_dev();
    let improvement = best_y - pred.mean;
    if sigma <= 0.0 || !sigma.is_finite() {
        return improvement.max(0.0);
    }
    let z = improvement / sigma;
    let n = Normal::standard();
    (improvement * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

/// Encodes a configuration that is already known to belong to `space`.
pub(crate) fn encode_valid(space: &SearchSpace, config: &Configuration) -> Vec<f64> {
    let mut out = Vec::with_capacity(space.encoded_dim());
    space.encode_into(config, &mut out);
    out
}
