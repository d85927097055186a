use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    encode_valid, expected_improvement, training_rows, BaseSurrogate, EnsembleSurrogate,
    ForestParams,
};
use crate::space::{Configuration, SearchSpace};
use crate::store::{ConfigId, MeasurementStore};
use crate::tuner::TunerParams;

/// Configurations currently being evaluated.
#[derive(Debug, Clone, Default)]
pub struct PendingSet {
    items: Vec<(ConfigId, Configuration)>,
}

impl PendingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if `id` is already pending.
    pub fn insert(&mut self, id: ConfigId, config: Configuration) -> bool {
        if self.contains(id) {
            return false;
        }
        self.items.push((id, config));
        true
    }

    pub fn remove(&mut self, id: ConfigId) -> Option<Configuration> {
        let pos = self.items.iter().position(|(i, _)| *i == id)?;
        Some(self.items.remove(pos).1)
    }

    pub fn contains(&self, id: ConfigId) -> bool {
        self.items.iter().any(|(i, _)| *i == id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn configs(&self) -> impl Iterator<Item = &Configuration> {
        self.items.iter().map(|(_, c)| c)
    }
}

/// Acquisition-maximization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SuggestParams {
    pub n_random: usize,
    pub n_chains: usize,
    pub chain_length: usize,
    pub step_scale: f64,
    pub forest: ForestParams,
}

impl Default for SuggestParams {
    fn default() -> Self {
        Self {
            n_random: 2000,
            n_chains: 10,
            chain_length: 20,
            step_scale: 0.1,
            forest: ForestParams::default(),
        }
    }
}

/// [`suggest_with`] using default acquisition settings.
pub fn suggest(
    space: &SearchSpace,
    store: &MeasurementStore,
    pending: &PendingSet,
    ens: &EnsembleSurrogate,
    tuner: &TunerParams,
    seed: u64,
) -> Configuration {
    suggest_with(
        space,
        store,
        pending,
        ens,
        tuner,
        &SuggestParams::default(),
        seed,
    )
}

/// Pending-aware sampling.
///
/// Pending configurations are imputed with the median observed value of the
/// top level (or of the highest non-empty level before any top-level result
/// exists), that level's surrogate is refit on the augmented data, and the
/// candidate maximizing expected improvement under the ensemble is returned.
/// Falls back to random sampling when no surrogate is usable. The result
/// never equals a pending configuration unless the space is exhausted.
pub fn suggest_with(
    space: &SearchSpace,
    store: &MeasurementStore,
    pending: &PendingSet,
    ens: &EnsembleSurrogate,
    tuner: &TunerParams,
    params: &SuggestParams,
    seed: u64,
) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pending_rows: Vec<Vec<f64>> = pending.configs().map(|c| encode_valid(space, c)).collect();
    let is_pending = |row: &[f64]| pending_rows.iter().any(|p| p.as_slice() == row);

    let top = tuner.levels();
    let level = if store.training_data(top).next().is_some() {
        Some(top)
    } else {
        store.highest_nonempty_level()
    };
    let Some(level) = level else {
        return random_avoiding(space, &is_pending, &mut rng);
    };

    let mut ys: Vec<f64> = store.training_data(level).map(|m| m.y).collect();
    let imputed = median(&mut ys);
    let best_y = ys[0];

    let refit = (!pending.is_empty()).then(|| {
        let (mut x, mut y) = training_rows(space, store.training_data(level));
        x.extend(pending_rows.iter().cloned());
        y.extend(std::iter::repeat_n(imputed, pending_rows.len()));
        BaseSurrogate::fit(level, &x, &y, &params.forest, seed ^ 0x9e37_79b9_7f4a_7c15)
    });
    let replacement = refit.as_ref().map(|b| (level, b));

    if !ens.usable_with(replacement) {
        debug!("no usable surrogate; sampling at random");
        return random_avoiding(space, &is_pending, &mut rng);
    }

    let score = |row: &[f64]| {
        ens.predict_replacing(row, replacement)
            .map(|p| expected_improvement(&p, best_y))
            .unwrap_or(0.0)
    };

    let mut best: Option<(f64, Configuration)> = None;
    let mut consider = |config: Configuration, row: &[f64], ei: f64| {
        if !is_pending(row) && best.as_ref().is_none_or(|(b, _)| ei > *b) {
            best = Some((ei, config));
        }
    };

    for _ in 0..params.n_random {
        let c = space.sample(&mut rng);
        let row = encode_valid(space, &c);
        let ei = score(&row);
        consider(c, &row, ei);
    }

    let group = store.group(level);
    let starts = store
        .ranking(level)
        .into_iter()
        .map(|i| &group[i])
        .filter(|m| !m.failed)
        .take(params.n_chains);
    for start in starts {
        let mut current = start.config.clone();
        let mut current_ei = score(&encode_valid(space, &current));
        for _ in 0..params.chain_length {
            let next = space.neighbor(&current, params.step_scale, &mut rng);
            let row = encode_valid(space, &next);
            let ei = score(&row);
            consider(next.clone(), &row, ei);
            if ei >= current_ei {
                current = next;
                current_ei = ei;
            }
        }
    }

    match best {
        Some((_, config)) => config,
        None => random_avoiding(space, &is_pending, &mut rng),
    }
}

/// Sorts `ys` ascending and returns the median.
fn median(ys: &mut [f64]) -> f64 {
    ys.sort_by(f64::total_cmp);
    let n = ys.len();
    if n % 2 == 1 {
        ys[n / 2]
    } else {
        0.5 * (ys[n / 2 - 1] + ys[n / 2])
    }
}

fn random_avoiding<R: Rng>(
    space: &SearchSpace,
    is_pending: &dyn Fn(&[f64]) -> bool,
    rng: &mut R,
) -> Configuration {
    let mut config = space.sample(rng);
    for _ in 0..1000 {
        if !is_pending(&encode_valid(space, &config)) {
            break;
        }
        config = space.sample(rng);
    }
    config
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ParamSpec, ParamValue};
    use crate::store::Measurement;
    use crate::surrogate::Predictor;

    fn space_1d() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0, false).unwrap()]).unwrap()
    }

    fn x_of(c: &Configuration) -> f64 {
        match c.values()[0] {
            ParamValue::Real(v) => v,
            _ => unreachable!(),
        }
    }

    /// Store with `n` level-1 measurements of `f` on an even grid.
    fn store_1d(f: impl Fn(f64) -> f64, n: usize) -> MeasurementStore {
        let mut store = MeasurementStore::new(1);
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            store
                .record(Measurement {
                    config_id: i as u64,
                    config: Configuration::new(vec![ParamValue::Real(x)]),
                    y: f(x),
                    failed: false,
                    level: 1,
                    bracket: 1,
                    start: 0.0,
                    end: i as f64,
                    worker: 0,
                })
                .unwrap();
        }
        store
    }

    fn fitted_ensemble(space: &SearchSpace, store: &MeasurementStore) -> EnsembleSurrogate {
        let base =
            BaseSurrogate::fit_measurements(space, 1, store.group(1), &ForestParams::default(), 1);
        EnsembleSurrogate::new(vec![base], vec![1.0]).unwrap()
    }

    #[test]
    fn cold_start_is_random_within_bounds() {
        let space = space_1d();
        let tuner = TunerParams::new(3, 1).unwrap();
        let store = MeasurementStore::new(1);
        let ens = EnsembleSurrogate::new(vec![BaseSurrogate::unfit(1)], vec![1.0]).unwrap();
        let c = suggest(&space, &store, &PendingSet::new(), &ens, &tuner, 3);
        assert!(space.validate(&c).is_ok());
    }

    #[test]
    fn suggestion_lands_in_the_basin() {
        let space = space_1d();
        let tuner = TunerParams::new(3, 1).unwrap();
        let f = |x: f64| (x - 0.7).powi(2);
        let store = store_1d(f, 12);
        let ens = fitted_ensemble(&space, &store);
        // Dense-grid oracle of the acquisition argmax under the same surrogate.
        let best_y = store.best(1).unwrap().y;
        let grid_arg = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .max_by(|a, b| {
                let ea = expected_improvement(&ens.bases()[0].predict(&[*a]).unwrap(), best_y);
                let eb = expected_improvement(&ens.bases()[0].predict(&[*b]).unwrap(), best_y);
                ea.total_cmp(&eb)
            })
            .unwrap();
        let c = suggest(&space, &store, &PendingSet::new(), &ens, &tuner, 9);
        let x = x_of(&c);
        assert!(
            (x - 0.7).abs() < 0.2,
            "suggested {x}, grid argmax {grid_arg}"
        );
        assert!((grid_arg - 0.7).abs() < 0.2);
    }

    #[test]
    fn pending_argmax_is_not_repeated_and_imputation_penalizes_it() {
        let space = space_1d();
        let tuner = TunerParams::new(3, 1).unwrap();
        let store = store_1d(|x| (x - 0.3).powi(2), 10);
        let ens = fitted_ensemble(&space, &store);
        let first = suggest(&space, &store, &PendingSet::new(), &ens, &tuner, 21);

        let mut pending = PendingSet::new();
        pending.insert(100, first.clone());
        let second = suggest(&space, &store, &pending, &ens, &tuner, 21);
        assert_ne!(
            space.encode(&first).unwrap(),
            space.encode(&second).unwrap()
        );

        // The refit surrogate pulls the pending point toward the median.
        let mut ys: Vec<f64> = store.training_data(1).map(|m| m.y).collect();
        let med = median(&mut ys);
        let (mut x, mut y) = training_rows(&space, store.training_data(1));
        x.push(space.encode(&first).unwrap());
        y.push(med);
        let refit = BaseSurrogate::fit(1, &x, &y, &ForestParams::default(), 1);
        let row = space.encode(&first).unwrap();
        let before = ens.predict(&row).unwrap();
        let after = ens.predict_replacing(&row, Some((1, &refit))).unwrap();
        assert!(
            after.mean > before.mean,
            "before {before:?} after {after:?}"
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let space = space_1d();
        let tuner = TunerParams::new(3, 1).unwrap();
        let store = store_1d(|x| (x * 6.0).sin(), 15);
        let ens = fitted_ensemble(&space, &store);
        let mut pending = PendingSet::new();
        pending.insert(50, Configuration::new(vec![ParamValue::Real(0.42)]));
        let a = suggest(&space, &store, &pending, &ens, &tuner, 77);
        let b = suggest(&space, &store, &pending, &ens, &tuner, 77);
        assert_eq!(a, b);
    }

    #[test]
    fn pending_set_rejects_duplicates() {
        let mut p = PendingSet::new();
        let c = Configuration::new(vec![ParamValue::Real(0.1)]);
        assert!(p.insert(1, c.clone()));
        assert!(!p.insert(1, c.clone()));
        assert_eq!(p.remove(1), Some(c));
        assert!(p.is_empty());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
