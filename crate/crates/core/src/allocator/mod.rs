//! Bracket selection.
//!
//! Each level's surrogate is scored by how many pairs of top-level
//! measurements it orders incorrectly. Resampling those losses gives `theta`,
//! the probability that each level's surrogate is the most precise; scaling
//! by the inverse resource cost and normalizing gives the bracket weights `w`.

mod ranking;

pub use ranking::{ranking_loss, weighted_ranking_loss};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::space::SearchSpace;
use crate::store::{Measurement, MeasurementStore};
use crate::surrogate::{
    check_probability_vector, encode_valid, BaseSurrogate, ForestParams, Predictor,
};
use crate::tuner::TunerParams;

/// Precision weights `theta`, cost coefficients `c_i = 1 / r_i`, and the
/// normalized bracket distribution `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketWeights {
    pub theta: Vec<f64>,
    pub cost: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn bracket_weights(theta: &[f64], tuner: &TunerParams) -> Result<BracketWeights> {
    check_probability_vector(theta)?;
    if theta.len() != tuner.levels() {
        return Err(crate::Error::Setup(format!(
            "theta has {} entries for {} levels",
            theta.len(),
            tuner.levels()
        )));
    }
    let cost: Vec<f64> = tuner.resources().iter().map(|r| 1.0 / *r as f64).collect();
    let raw: Vec<f64> = cost.iter().zip(theta).map(|(c, t)| c * t).collect();
    let total: f64 = raw.iter().sum();
    let w = if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / theta.len() as f64; theta.len()]
    };
    Ok(BracketWeights {
        theta: theta.to_vec(),
        cost,
        w,
    })
}

/// Loss of a surrogate on `d_top`: miss-ranked ordered pairs between its
/// predictions and the observed values. Unfit surrogates score `N^2`.
pub fn surrogate_ranking_loss<P: Predictor>(
    surr: &P,
    space: &SearchSpace,
    d_top: &[&Measurement],
) -> u64 {
    let n = d_top.len() as u64;
    if !surr.is_fitted() {
        return n * n;
    }
    let preds: Vec<f64> = d_top
        .iter()
        .map(|m| {
            surr.predict(&encode_valid(space, &m.config))
                .expect("fitted")
                .mean
        })
        .collect();
    let ys: Vec<f64> = d_top.iter().map(|m| m.y).collect();
    ranking_loss(&preds, &ys)
}

/// Out-of-fold predictions of a surrogate trained on `d_top` itself.
///
/// Uses `folds`-fold cross-validation, or leave-one-out when fewer than
/// `folds` points exist. A fold whose training part is degenerate predicts
/// its training mean. Returns `None` for fewer than two points.
pub fn cv_predictions(
    space: &SearchSpace,
    d_top: &[&Measurement],
    folds: usize,
    params: &ForestParams,
    seed: u64,
) -> Option<Vec<f64>> {
    let n = d_top.len();
    if n < 2 {
        return None;
    }
    let folds = if n >= folds { folds.max(2) } else { n };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let rows: Vec<Vec<f64>> = d_top
        .iter()
        .map(|m| encode_valid(space, &m.config))
        .collect();
    let mut out = vec![0.0; n];
    for f in 0..folds {
        let (train_x, train_y): (Vec<Vec<f64>>, Vec<f64>) = (0..n)
            .filter(|&i| fold_of[i] != f)
            .map(|i| (rows[i].clone(), d_top[i].y))
            .unzip();
        let model = BaseSurrogate::fit(
            0,
            &train_x,
            &train_y,
            params,
            seed.wrapping_add(f as u64 + 1),
        );
        let fallback = train_y.iter().sum::<f64>() / train_y.len() as f64;
        for i in (0..n).filter(|&i| fold_of[i] == f) {
            out[i] = model.predict(&rows[i]).map_or(fallback, |p| p.mean);
        }
    }
    Some(out)
}

/// Cross-validated ranking loss of the top-level surrogate.
pub fn ranking_loss_cv(
    space: &SearchSpace,
    d_top: &[&Measurement],
    folds: usize,
    params: &ForestParams,
    seed: u64,
) -> u64 {
    let n = d_top.len() as u64;
    match cv_predictions(space, d_top, folds, params, seed) {
        Some(preds) => {
            let ys: Vec<f64> = d_top.iter().map(|m| m.y).collect();
            ranking_loss(&preds, &ys)
        }
        None => n * n,
    }
}

/// Resampled argmin frequencies.
///
/// `preds[i]` holds surrogate `i`'s predictions for the top-level points
/// (`None` if unfit; such surrogates never win). Each of `samples` rounds
/// bootstraps the point indices, scores every surrogate on the resampled
/// pairs, and credits the minimizer, splitting ties uniformly at random.
pub fn theta_from_predictions<R: Rng>(
    preds: &[Option<Vec<f64>>],
    ys: &[f64],
    samples: usize,
    rng: &mut R,
) -> Vec<f64> {
    let k = preds.len();
    let candidates: Vec<usize> = (0..k).filter(|&i| preds[i].is_some()).collect();
    if candidates.is_empty() || samples == 0 {
        return vec![1.0 / k as f64; k];
    }
    let n = ys.len();
    let mut wins = vec![0usize; k];
    let mut counts = vec![0u64; n];
    let mut tied = Vec::with_capacity(k);
    for _ in 0..samples {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        let mut best = u64::MAX;
        tied.clear();
        for &i in &candidates {
            let loss = weighted_ranking_loss(preds[i].as_deref().expect("candidate"), ys, &counts);
            if loss < best {
                best = loss;
                tied.clear();
            }
            if loss == best {
                tied.push(i);
            }
        }
        wins[tied[rng.random_range(0..tied.len())]] += 1;
    }
    wins.iter().map(|w| *w as f64 / samples as f64).collect()
}

/// Estimates `theta` from the store.
///
/// Levels below the top use their fitted base surrogates; the top level uses
/// 5-fold out-of-fold predictions. With fewer than two successful top-level
/// measurements, `theta` is uniform over levels that have data.
pub fn estimate_theta(
    space: &SearchSpace,
    store: &MeasurementStore,
    bases: &[BaseSurrogate],
    samples: usize,
    params: &ForestParams,
    seed: u64,
) -> Vec<f64> {
    let k = store.levels();
    let d_top: Vec<&Measurement> = store.training_data(k).collect();
    if d_top.len() < 2 {
        return uniform_over_nonempty(store);
    }
    let ys: Vec<f64> = d_top.iter().map(|m| m.y).collect();
    let mut preds: Vec<Option<Vec<f64>>> = bases[..k - 1]
        .iter()
        .map(|b| {
            b.is_fitted().then(|| {
                d_top
                    .iter()
                    .map(|m| {
                        b.predict(&encode_valid(space, &m.config))
                            .expect("fitted")
                            .mean
                    })
                    .collect()
            })
        })
        .collect();
    preds.push(cv_predictions(space, &d_top, 5, params, seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    theta_from_predictions(&preds, &ys, samples, &mut rng)
}

fn uniform_over_nonempty(store: &MeasurementStore) -> Vec<f64> {
    let k = store.levels();
    let mask: Vec<bool> = (1..=k)
        .map(|l| store.training_data(l).next().is_some())
        .collect();
    let m = mask.iter().filter(|b| **b).count();
    if m == 0 {
        return vec![1.0 / k as f64; k];
    }
    mask.iter()
        .map(|&b| if b { 1.0 / m as f64 } else { 0.0 })
        .collect()
}

/// Round-robin initialization followed by sampling from `w`.
#[derive(Debug, Clone)]
pub struct AllocatorState {
    levels: usize,
    round_robin: usize,
    starts: usize,
    pub samples: usize,
    weights: Option<BracketWeights>,
}

impl AllocatorState {
    pub fn new(levels: usize, round_robin: usize, samples: usize) -> Self {
        Self {
            levels,
            round_robin,
            starts: 0,
            samples,
            weights: None,
        }
    }

    pub fn starts(&self) -> usize {
        self.starts
    }

    pub fn weights(&self) -> Option<&BracketWeights> {
        self.weights.as_ref()
    }

    pub fn set_weights(&mut self, weights: BracketWeights) {
        self.weights = Some(weights);
    }

    /// Picks the bracket (1-based) for the next fresh job.
    pub fn choose_bracket<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let k = self.levels;
        let bracket = if self.starts < self.round_robin * k {
            self.starts % k + 1
        } else {
            match &self.weights {
                Some(bw) => {
                    WeightedIndex::new(&bw.w)
                        .expect("valid weights")
                        .sample(rng)
                        + 1
                }
                None => rng.random_range(1..=k),
            }
        };
        self.starts += 1;
        bracket
    }
}
