//! Synchronous successive halving and Hyperband on a simulated worker pool.
//!
//! Each rung is list-scheduled onto the earliest free worker; the next rung
//! starts only after the last job of the current one finishes. Time workers
//! spend waiting at that barrier is accumulated as idle time.

use super::{BracketSchedule, Job, JobKind};
use crate::bench::EvalResult;
use crate::error::{Error, Result};
use crate::space::Configuration;
use crate::store::ConfigId;

/// Simulated workers with per-worker slowdown factors.
#[derive(Debug, Clone)]
pub struct SyncPool {
    free: Vec<f64>,
    slowdown: Vec<f64>,
    budget: f64,
    idle: f64,
    exhausted: bool,
}

impl SyncPool {
    /// `slowdown[w]` multiplies every cost charged on worker `w`.
    pub fn new(slowdown: Vec<f64>, budget: f64) -> Result<Self> {
        if slowdown.is_empty() || slowdown.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::Setup(
                "need at least one worker with a positive slowdown".into(),
            ));
        }
        Ok(Self {
            free: vec![0.0; slowdown.len()],
            slowdown,
            budget,
            idle: 0.0,
            exhausted: budget <= 0.0,
        })
    }

    pub fn uniform(n_workers: usize, budget: f64) -> Result<Self> {
        Self::new(vec![1.0; n_workers], budget)
    }

    pub fn idle_time(&self) -> f64 {
        self.idle
    }

    /// True once a job could not finish within the budget.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    fn earliest_worker(&self) -> usize {
        (0..self.free.len())
            .min_by(|&a, &b| self.free[a].total_cmp(&self.free[b]).then(a.cmp(&b)))
            .expect("non-empty pool")
    }
}

/// A job that finished within the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Completed {
    pub job: Job,
    pub result: EvalResult,
    pub start: f64,
    pub end: f64,
    pub worker: usize,
}

/// Runs one bracket rung by rung. `configs` must hold exactly `n_1`
/// configurations. Failed evaluations rank last. Returns completions in
/// time order; stops early when the budget runs out.
pub fn sha_run_bracket(
    schedule: &BracketSchedule,
    configs: Vec<(ConfigId, Configuration)>,
    pool: &mut SyncPool,
    evaluate: &mut dyn FnMut(&Job) -> EvalResult,
) -> Result<Vec<Completed>> {
    let first = &schedule.rungs[0];
    if configs.len() as u64 != first.n {
        return Err(Error::Setup(format!(
            "bracket {} needs {} configurations, got {}",
            schedule.bracket,
            first.n,
            configs.len()
        )));
    }
    let mut out = Vec::new();
    let mut survivors = configs;
    for (i, rung) in schedule.rungs.iter().enumerate() {
        if pool.exhausted || survivors.is_empty() {
            break;
        }
        let kind = if i == 0 {
            JobKind::Fresh
        } else {
            JobKind::Promotion
        };
        let mut done = Vec::with_capacity(survivors.len());
        for (config_id, config) in survivors.drain(..) {
            let job = Job {
                config_id,
                config,
                level: rung.level,
                bracket: schedule.bracket,
                kind,
            };
            let result = evaluate(&job);
            let w = pool.earliest_worker();
            let start = pool.free[w];
            let end = start + result.cost_seconds * pool.slowdown[w];
            if end > pool.budget {
                // The worker stays busy past the budget; the job is lost.
                pool.free[w] = f64::INFINITY;
                pool.exhausted = true;
                continue;
            }
            pool.free[w] = end;
            done.push(Completed {
                job,
                result,
                start,
                end,
                worker: w,
            });
        }
        if pool.exhausted {
            done.sort_by(|a, b| a.end.total_cmp(&b.end).then(a.worker.cmp(&b.worker)));
            out.extend(done);
            break;
        }
        let barrier = pool.free.iter().copied().fold(0.0, f64::max);
        pool.idle += pool.free.iter().map(|f| barrier - f).sum::<f64>();
        pool.free.iter_mut().for_each(|f| *f = barrier);

        let keep = rung.n as usize / schedule_eta(schedule).max(1);
        let mut order: Vec<usize> = (0..done.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (&done[a], &done[b]);
            x.result
                .failed
                .cmp(&y.result.failed)
                .then(x.result.y.total_cmp(&y.result.y))
                .then(x.end.total_cmp(&y.end))
                .then(a.cmp(&b))
        });
        if i + 1 < schedule.rungs.len() {
            survivors = order
                .into_iter()
                .take(keep.min(schedule.rungs[i + 1].n as usize))
                .map(|j| (done[j].job.config_id, done[j].job.config.clone()))
                .collect();
        }
        done.sort_by(|a, b| a.end.total_cmp(&b.end).then(a.worker.cmp(&b.worker)));
        out.extend(done);
    }
    Ok(out)
}

fn schedule_eta(schedule: &BracketSchedule) -> usize {
    match schedule.rungs.as_slice() {
        [a, b, ..] => (b.resource / a.resource) as usize,
        _ => 1,
    }
}

/// Cycles through `brackets` in order, sampling fresh configurations with
/// `sample(bracket)`, until the pool's budget runs out. `on_bracket` is
/// called with each bracket index as it starts.
pub fn hyperband_run(
    brackets: &[BracketSchedule],
    pool: &mut SyncPool,
    sample: &mut dyn FnMut(usize) -> (ConfigId, Configuration),
    evaluate: &mut dyn FnMut(&Job) -> EvalResult,
    on_bracket: &mut dyn FnMut(usize),
) -> Result<Vec<Completed>> {
    let mut out = Vec::new();
    if brackets.is_empty() {
        return Ok(out);
    }
    for schedule in brackets.iter().cycle() {
        if pool.exhausted {
            break;
        }
        on_bracket(schedule.bracket);
        let configs = (0..schedule.rungs[0].n)
            .map(|_| sample(schedule.bracket))
            .collect();
        out.extend(sha_run_bracket(schedule, configs, pool, evaluate)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::hyperband_schedule;
    use crate::space::ParamValue;

    fn cfg(id: ConfigId) -> (ConfigId, Configuration) {
        (id, Configuration::new(vec![ParamValue::Real(id as f64)]))
    }

    /// y = id, cost = resource units.
    fn by_id(job: &Job) -> EvalResult {
        EvalResult::ok(job.config_id as f64 * 0.1, 3f64.powi(job.level as i32 - 1))
    }

    #[test]
    fn survivors_are_top_of_previous_rung() {
        let hb = hyperband_schedule(27, 3).unwrap();
        let mut pool = SyncPool::uniform(4, 1e9).unwrap();
        // Scramble ids so ranking is not insertion order.
        let configs: Vec<_> = (0..27).map(|i| cfg((i * 7) % 27)).collect();
        let out = sha_run_bracket(&hb[0], configs, &mut pool, &mut by_id).unwrap();
        let at = |level| {
            let mut ids: Vec<_> = out
                .iter()
                .filter(|c| c.job.level == level)
                .map(|c| c.job.config_id)
                .collect();
            ids.sort();
            ids
        };
        assert_eq!(at(1).len(), 27);
        assert_eq!(at(2), (0..9).collect::<Vec<_>>());
        assert_eq!(at(3), [0, 1, 2]);
        assert_eq!(at(4), [0]);
    }

    #[test]
    fn three_configs_one_survivor() {
        let hb = hyperband_schedule(3, 3).unwrap();
        assert_eq!(hb[0].rungs.len(), 2);
        let mut pool = SyncPool::uniform(1, 1e9).unwrap();
        let out =
            sha_run_bracket(&hb[0], (5..8).map(cfg).collect(), &mut pool, &mut by_id).unwrap();
        let promoted: Vec<_> = out
            .iter()
            .filter(|c| c.job.level == 2)
            .map(|c| c.job.config_id)
            .collect();
        assert_eq!(promoted, [5]);
    }

    #[test]
    fn barrier_waits_for_straggler() {
        let hb = hyperband_schedule(3, 3).unwrap();
        let mut pool = SyncPool::new(vec![1.0, 1.0, 10.0], 1e9).unwrap();
        let out =
            sha_run_bracket(&hb[0], (0..3).map(cfg).collect(), &mut pool, &mut by_id).unwrap();
        let rung1_end = out
            .iter()
            .filter(|c| c.job.level == 1)
            .map(|c| c.end)
            .fold(0.0, f64::max);
        assert_eq!(rung1_end, 10.0);
        let rung2 = out.iter().find(|c| c.job.level == 2).unwrap();
        assert_eq!(rung2.start, rung1_end);
        assert_eq!(pool.idle_time(), 18.0 + 2.0 * 3.0);
    }

    #[test]
    fn failures_rank_last() {
        let hb = hyperband_schedule(3, 3).unwrap();
        let mut pool = SyncPool::uniform(3, 1e9).unwrap();
        let mut eval = |job: &Job| {
            if job.config_id == 0 {
                EvalResult::failed(1.0)
            } else {
                by_id(job)
            }
        };
        let out = sha_run_bracket(&hb[0], (0..3).map(cfg).collect(), &mut pool, &mut eval).unwrap();
        assert_eq!(out.last().unwrap().job.config_id, 1);
    }

    #[test]
    fn one_iteration_evaluates_27_at_level_one() {
        let hb = hyperband_schedule(27, 3).unwrap();
        // One iteration on one worker costs 27+27+27+27 (bracket 1) + 36+36+27
        // (bracket 2) + 54+54 (bracket 3) + 108 (bracket 4).
        let iteration = 4.0 * 27.0 + 99.0 + 108.0 + 108.0;
        let mut pool = SyncPool::uniform(1, iteration).unwrap();
        let mut next = 0;
        let mut visits = Vec::new();
        let out = hyperband_run(
            &hb,
            &mut pool,
            &mut |_| {
                next += 1;
                cfg(next)
            },
            &mut by_id,
            &mut |b| visits.push(b),
        )
        .unwrap();
        let fresh_level1 = out.iter().filter(|c| c.job.level == 1).count();
        assert_eq!(fresh_level1, 27);
        assert_eq!(&visits[..4], [1, 2, 3, 4]);
        assert!(out.iter().all(|c| c.end <= iteration));
    }

    #[test]
    fn two_iterations_visit_brackets_in_order() {
        let hb = hyperband_schedule(27, 3).unwrap();
        let mut pool = SyncPool::uniform(1, 2.0 * 423.0).unwrap();
        let mut next = 0;
        let mut visits = Vec::new();
        hyperband_run(
            &hb,
            &mut pool,
            &mut |_| {
                next += 1;
                cfg(next)
            },
            &mut by_id,
            &mut |b| visits.push(b),
        )
        .unwrap();
        assert_eq!(&visits[..8], [1, 2, 3, 4, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_budget_runs_nothing() {
        let hb = hyperband_schedule(27, 3).unwrap();
        let mut pool = SyncPool::uniform(2, 0.0).unwrap();
        let out = hyperband_run(&hb, &mut pool, &mut |_| cfg(0), &mut by_id, &mut |_| {}).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn wrong_config_count_is_an_error() {
        let hb = hyperband_schedule(27, 3).unwrap();
        let mut pool = SyncPool::uniform(1, 1e9).unwrap();
        assert!(sha_run_bracket(&hb[0], vec![cfg(0)], &mut pool, &mut by_id).is_err());
    }
}
