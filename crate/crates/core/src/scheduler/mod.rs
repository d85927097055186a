//! Hyperband bracket schedules, promotion rules and job formation.
//!
//! Brackets are numbered from 1: bracket `j` starts fresh configurations at
//! level `j`, so bracket 1 is the most exploratory. All brackets share the
//! pooled measurement groups `D_1..D_K`.

pub mod sync;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Configuration;
use crate::store::{ConfigId, MeasurementStore};
use crate::tuner::{floor_log, TunerParams};

/// One `(n_i, r_i)` stage of a bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rung {
    pub level: usize,
    pub n: u64,
    pub resource: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketSchedule {
    /// 1-based bracket index; equals the starting level.
    pub bracket: usize,
    /// Hyperband's `s`, with `bracket = s_max - s + 1`.
    pub s: usize,
    pub rungs: Vec<Rung>,
}

impl BracketSchedule {
    pub fn start_level(&self) -> usize {
        self.rungs[0].level
    }
}

/// Hyperband brackets for maximum resource `R` and discard proportion `eta`,
/// most exploratory first.
///
/// With `s_max = floor(log_eta R)` and `B = (s_max + 1) R`, bracket `s` starts
/// `ceil((B / R) eta^s / (s + 1))` configurations at resource
/// `eta^(s_max - s)`; each later rung keeps `floor(n / eta)` of them at `eta`
/// times the resource. Resources are powers of `eta`, so a non-power `R` is
/// rounded down to `eta^s_max`.
pub fn hyperband_schedule(max_resource: u64, eta: u64) -> Result<Vec<BracketSchedule>> {
    if eta < 2 || max_resource < 1 {
        return Err(Error::InvalidTuner(format!(
            "need eta >= 2 and R >= 1, got eta={eta}, R={max_resource}"
        )));
    }
    let s_max = floor_log(max_resource, eta);
    let schedules = (0..=s_max)
        .rev()
        .map(|s| {
            let numer = (s_max as u64 + 1) * eta.pow(s as u32);
            let mut n = numer.div_ceil(s as u64 + 1);
            let start = s_max - s + 1;
            let rungs = (start..=s_max + 1)
                .map(|level| {
                    let rung = Rung {
                        level,
                        n,
                        resource: eta.pow(level as u32 - 1),
                    };
                    n /= eta;
                    rung
                })
                .collect();
            BracketSchedule {
                bracket: start,
                s,
                rungs,
            }
        })
        .collect();
    Ok(schedules)
}

/// Per-bracket entry point into the shared rungs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RungLadder {
    pub bracket: usize,
    pub start_level: usize,
}

impl RungLadder {
    /// Ladder for bracket `j`, which starts at level `j`.
    pub fn for_bracket(bracket: usize, tuner: &TunerParams) -> Result<Self> {
        tuner.check_level(bracket)?;
        Ok(Self {
            bracket,
            start_level: bracket,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Fresh,
    Promotion,
}

/// A unit of work: evaluate `config` at `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub config_id: ConfigId,
    pub config: Configuration,
    pub level: usize,
    pub bracket: usize,
    pub kind: JobKind,
}

/// Scheduling algorithm selected for an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dasha,
    Asha,
    Sha,
    Hyperband,
    Random,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Dasha,
        Variant::Asha,
        Variant::Sha,
        Variant::Hyperband,
        Variant::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dasha => "dasha",
            Variant::Asha => "asha",
            Variant::Sha => "sha",
            Variant::Hyperband => "hyperband",
            Variant::Random => "random",
        }
    }

    pub fn is_synchronous(self) -> bool {
        matches!(self, Variant::Sha | Variant::Hyperband)
    }

    /// Promotion rule for the asynchronous variants.
    pub fn promotion_policy(self) -> Option<PromotionPolicy> {
        match self {
            Variant::Dasha => Some(PromotionPolicy::Delayed),
            Variant::Asha => Some(PromotionPolicy::Asha),
            _ => None,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Setup(format!(
                    "unknown variant `{s}`; valid variants: {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromotionPolicy {
    /// Promote any unpromoted top-`1/eta` configuration.
    Asha,
    /// Additionally require `|D_k| >= eta (|D_{k+1}| + 1)`.
    Delayed,
}

/// A promotion decision, with the group sizes seen when it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct Promotion {
    pub config_id: ConfigId,
    pub config: Configuration,
    pub from_level: usize,
    pub bracket: usize,
    pub d_k: usize,
    pub d_next: usize,
}

impl Promotion {
    pub fn into_job(self) -> Job {
        Job {
            config_id: self.config_id,
            config: self.config,
            level: self.from_level + 1,
            bracket: self.bracket,
            kind: JobKind::Promotion,
        }
    }
}

/// Whether level `k` may promote under `policy`, ignoring candidates.
pub fn delay_satisfied(d_k: usize, d_next: usize, eta: u64) -> bool {
    d_k as u64 >= eta * (d_next as u64 + 1)
}

/// Finds and flags the next promotion, scanning from level `K-1` down to
/// `min_level`. Returns `None` when no level can promote.
///
/// `running[i]` is the number of dispatched, unfinished jobs at level
/// `i + 1` (missing entries count as 0). They count toward `|D_{k+1}|`, so
/// that `|D_{k+1}| <= |D_k| / eta` keeps holding once they finish.
pub fn next_promotion(
    store: &mut MeasurementStore,
    tuner: &TunerParams,
    policy: PromotionPolicy,
    min_level: usize,
    running: &[usize],
) -> Option<Promotion> {
    let eta = tuner.eta();
    let top = tuner.levels();
    for k in (min_level.max(1)..top).rev() {
        let d_k = store.count(k);
        let d_next = store.count(k + 1) + running.get(k).copied().unwrap_or(0);
        if policy == PromotionPolicy::Delayed && !delay_satisfied(d_k, d_next, eta) {
            continue;
        }
        let Some(best) = store.top_candidates(k, eta).first().copied() else {
            continue;
        };
        let promotion = Promotion {
            config_id: best.config_id,
            config: best.config.clone(),
            from_level: k,
            bracket: best.bracket,
            d_k,
            d_next,
        };
        store
            .mark_promoted(promotion.config_id, k)
            .expect("top_candidates excludes promoted configs");
        return Some(promotion);
    }
    None
}

/// One job from a ladder: a promotion if any level at or above the ladder's
/// start can promote, otherwise a fresh configuration from `sample` at the
/// start level.
pub fn get_job(
    store: &mut MeasurementStore,
    tuner: &TunerParams,
    ladder: RungLadder,
    policy: PromotionPolicy,
    running: &[usize],
    sample: impl FnOnce() -> (ConfigId, Configuration),
) -> Job {
    if let Some(p) = next_promotion(store, tuner, policy, ladder.start_level, running) {
        return p.into_job();
    }
    let (config_id, config) = sample();
    Job {
        config_id,
        config,
        level: ladder.start_level,
        bracket: ladder.bracket,
        kind: JobKind::Fresh,
    }
}

/// [`get_job`] with the delayed promotion rule.
pub fn dasha_get_job(
    store: &mut MeasurementStore,
    tuner: &TunerParams,
    ladder: RungLadder,
    running: &[usize],
    sample: impl FnOnce() -> (ConfigId, Configuration),
) -> Job {
    get_job(
        store,
        tuner,
        ladder,
        PromotionPolicy::Delayed,
        running,
        sample,
    )
}

/// [`get_job`] with the plain asynchronous rule.
pub fn asha_get_job(
    store: &mut MeasurementStore,
    tuner: &TunerParams,
    ladder: RungLadder,
    running: &[usize],
    sample: impl FnOnce() -> (ConfigId, Configuration),
) -> Job {
    get_job(store, tuner, ladder, PromotionPolicy::Asha, running, sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamValue;
    use crate::store::Measurement;

    fn rungs(b: &BracketSchedule) -> Vec<(u64, u64)> {
        b.rungs.iter().map(|r| (r.n, r.resource)).collect()
    }

    #[test]
    fn table_for_27_and_3() {
        let hb = hyperband_schedule(27, 3).unwrap();
        assert_eq!(hb.len(), 4);
        assert_eq!(rungs(&hb[0]), [(27, 1), (9, 3), (3, 9), (1, 27)]);
        assert_eq!(rungs(&hb[1]), [(12, 3), (4, 9), (1, 27)]);
        assert_eq!(rungs(&hb[2]), [(6, 9), (2, 27)]);
        assert_eq!(rungs(&hb[3]), [(4, 27)]);
        assert_eq!(
            hb.iter().map(|b| b.start_level()).collect::<Vec<_>>(),
            [1, 2, 3, 4]
        );
        assert_eq!(hb.iter().map(|b| b.s).collect::<Vec<_>>(), [3, 2, 1, 0]);
    }

    #[test]
    fn degenerate_and_invalid() {
        let hb = hyperband_schedule(1, 3).unwrap();
        assert_eq!(hb.len(), 1);
        assert_eq!(rungs(&hb[0]), [(1, 1)]);
        assert!(hyperband_schedule(27, 1).is_err());
        assert!(hyperband_schedule(0, 3).is_err());
    }

    #[test]
    fn schedule_shape_invariants() {
        for (r, eta) in [(81, 3), (16, 2), (100, 4), (243, 3)] {
            for b in hyperband_schedule(r, eta).unwrap() {
                for w in b.rungs.windows(2) {
                    assert!(w[1].n < w[0].n);
                    assert_eq!(w[1].resource, w[0].resource * eta);
                }
                let top = eta.pow(floor_log(r, eta) as u32);
                assert_eq!(b.rungs.last().unwrap().resource, top);
            }
        }
    }

    fn meas(id: ConfigId, level: usize, y: f64) -> Measurement {
        Measurement {
            config_id: id,
            config: Configuration::new(vec![ParamValue::Real(id as f64 / 100.0)]),
            y,
            failed: false,
            level,
            bracket: 1,
            start: 0.0,
            end: id as f64,
            worker: 0,
        }
    }

    fn fresh() -> (ConfigId, Configuration) {
        (99, Configuration::new(vec![ParamValue::Real(0.99)]))
    }

    fn setup() -> (MeasurementStore, TunerParams, RungLadder) {
        let t = TunerParams::new(3, 27).unwrap();
        (
            MeasurementStore::new(4),
            t,
            RungLadder::for_bracket(1, &t).unwrap(),
        )
    }

    #[test]
    fn three_measurements_promote_best() {
        for policy in [PromotionPolicy::Delayed, PromotionPolicy::Asha] {
            let (mut s, t, l) = setup();
            for (id, y) in [(1, 0.1), (2, 0.2), (3, 0.3)] {
                s.record(meas(id, 1, y)).unwrap();
            }
            let job = get_job(&mut s, &t, l, policy, &[], fresh);
            assert_eq!(
                (job.config_id, job.level, job.kind),
                (1, 2, JobKind::Promotion)
            );
            assert!(s.is_promoted(1, 1));
        }
    }

    #[test]
    fn delay_bites_where_asha_promotes() {
        // |D_1| = 5 with rank-1 unpromoted, |D_2| = 1.
        let build = || {
            let (mut s, t, l) = setup();
            for (id, y) in [(1, 0.1), (2, 0.2), (3, 0.3), (4, 0.4), (5, 0.5)] {
                s.record(meas(id, 1, y)).unwrap();
            }
            s.record(meas(6, 2, 0.05)).unwrap();
            (s, t, l)
        };
        let (mut s, t, l) = build();
        let job = asha_get_job(&mut s, &t, l, &[], fresh);
        assert_eq!((job.config_id, job.kind), (1, JobKind::Promotion));
        let (mut s, t, l) = build();
        let job = dasha_get_job(&mut s, &t, l, &[], fresh);
        assert_eq!(
            (job.config_id, job.level, job.kind),
            (99, 1, JobKind::Fresh)
        );
    }

    #[test]
    fn both_refuse_when_top_already_promoted() {
        for policy in [PromotionPolicy::Delayed, PromotionPolicy::Asha] {
            let (mut s, t, l) = setup();
            for (id, y) in [(1, 0.1), (2, 0.2), (3, 0.3), (4, 0.4)] {
                s.record(meas(id, 1, y)).unwrap();
            }
            s.mark_promoted(1, 1).unwrap();
            s.record(meas(1, 2, 0.1)).unwrap();
            let job = get_job(&mut s, &t, l, policy, &[], fresh);
            assert_eq!(job.kind, JobKind::Fresh);
        }
    }

    #[test]
    fn empty_store_gives_fresh_job_at_start_level() {
        let (mut s, t, _) = setup();
        let l = RungLadder::for_bracket(3, &t).unwrap();
        let job = dasha_get_job(&mut s, &t, l, &[], fresh);
        assert_eq!((job.level, job.bracket, job.kind), (3, 3, JobKind::Fresh));
        assert!(RungLadder::for_bracket(5, &t).is_err());
    }

    #[test]
    fn ladder_ignores_levels_below_its_start() {
        let (mut s, t, _) = setup();
        for id in 1..=3 {
            s.record(meas(id, 1, id as f64)).unwrap();
        }
        let l = RungLadder::for_bracket(2, &t).unwrap();
        assert_eq!(
            dasha_get_job(&mut s, &t, l, &[], fresh).kind,
            JobKind::Fresh
        );
    }

    #[test]
    fn scans_highest_level_first() {
        let (mut s, t, l) = setup();
        for id in 1..=9 {
            s.record(meas(id, 1, id as f64)).unwrap();
        }
        for id in 10..=12 {
            s.record(meas(id, 2, id as f64)).unwrap();
        }
        let p = next_promotion(&mut s, &t, PromotionPolicy::Delayed, l.start_level, &[]).unwrap();
        assert_eq!((p.config_id, p.from_level, p.d_k, p.d_next), (10, 2, 3, 0));
    }

    #[test]
    fn running_jobs_count_toward_the_next_level() {
        let (mut s, t, l) = setup();
        for id in 1..=6 {
            s.record(meas(id, 1, id as f64)).unwrap();
        }
        let p = next_promotion(&mut s.clone(), &t, PromotionPolicy::Delayed, 1, &[0, 1]).unwrap();
        assert_eq!((p.d_k, p.d_next), (6, 1));
        assert!(next_promotion(&mut s.clone(), &t, PromotionPolicy::Delayed, 1, &[0, 2]).is_none());
        assert_eq!(
            asha_get_job(&mut s, &t, l, &[0, 2], fresh).kind,
            JobKind::Promotion
        );
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("dasha".parse::<Variant>().unwrap(), Variant::Dasha);
        let e = "bogus".parse::<Variant>().unwrap_err().to_string();
        assert!(e.contains("dasha, asha, sha, hyperband, random"), "{e}");
    }
}
