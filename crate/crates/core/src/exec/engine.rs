use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Clock, EngineConfig, PromotionRecord, RunOutput, RunStats, SamplerKind, Trajectory,
    TrajectoryRecord,
};
use crate::allocator::{bracket_weights, estimate_theta, AllocatorState};
use crate::bench::{mix_seed, EvalResult, Objective, MIN_COST};
use crate::error::{Error, Result};
use crate::scheduler::sync::{hyperband_run, SyncPool};
use crate::scheduler::{
    hyperband_schedule, next_promotion, Job, JobKind, PromotionPolicy, Variant,
};
use crate::space::Configuration;
use crate::store::{ConfigId, Measurement, MeasurementStore};
use crate::surrogate::{suggest_with, BaseSurrogate, EnsembleSurrogate, PendingSet};

const SAMPLER_SALT: u64 = 0x5a4d_706c_6572_0001;
const THETA_SALT: u64 = 0x7468_6574_6100_0002;
const FIT_SALT: u64 = 0x6669_7400_0000_0003;
const BRACKET_SALT: u64 = 0x6272_6163_6b00_0004;
const RANDOM_SALT: u64 = 0x7261_6e64_0000_0005;

/// Runs one experiment of `objective` under `config`.
///
/// On the simulated clock the result is a pure function of the inputs.
pub fn run_experiment(config: &EngineConfig, objective: &dyn Objective) -> Result<RunOutput> {
    config.validate()?;
    if objective.levels() != config.tuner.levels() {
        return Err(Error::Setup(format!(
            "objective has {} levels but eta={} and R={} give {}",
            objective.levels(),
            config.tuner.eta(),
            config.tuner.max_resource(),
            config.tuner.levels()
        )));
    }
    info!(
        "running {} with {} workers, budget {}s, seed {}",
        config.variant, config.n_workers, config.time_budget, config.seed
    );
    let mut coord = Coordinator::new(config, objective);
    match (config.variant.is_synchronous(), config.clock) {
        (true, _) => run_sync(&mut coord)?,
        (false, Clock::Simulated) => run_simulated(&mut coord),
        (false, Clock::Real) => run_real(&mut coord),
    }
    objective.shutdown();
    Ok(coord.finish())
}

/// Mutable experiment state, owned by the single event loop.
struct Coordinator<'a> {
    cfg: &'a EngineConfig,
    obj: &'a dyn Objective,
    policy: Option<PromotionPolicy>,
    store: MeasurementStore,
    pending: PendingSet,
    /// Dispatched, unfinished jobs per level.
    running: Vec<usize>,
    ensemble: EnsembleSurrogate,
    /// Successful measurement count per level at the last fit of its base.
    fitted: Vec<usize>,
    allocator: AllocatorState,
    bracket_rng: ChaCha8Rng,
    random_rng: ChaCha8Rng,
    next_id: ConfigId,
    since_refresh: usize,
    best_top: Option<f64>,
    trajectory: Trajectory,
    stats: RunStats,
}

impl<'a> Coordinator<'a> {
    fn new(cfg: &'a EngineConfig, obj: &'a dyn Objective) -> Self {
        let k = cfg.tuner.levels();
        let bases = (1..=k).map(BaseSurrogate::unfit).collect();
        Self {
            cfg,
            obj,
            policy: cfg.variant.promotion_policy(),
            store: MeasurementStore::new(k),
            pending: PendingSet::new(),
            running: vec![0; k],
            ensemble: EnsembleSurrogate::new(bases, vec![1.0 / k as f64; k])
                .expect("uniform theta"),
            fitted: vec![0; k],
            allocator: AllocatorState::new(k, cfg.round_robin, cfg.theta_samples),
            bracket_rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, BRACKET_SALT)),
            random_rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, RANDOM_SALT)),
            next_id: 0,
            since_refresh: 0,
            best_top: None,
            trajectory: Trajectory::new(),
            stats: RunStats::default(),
        }
    }

    fn learns(&self) -> bool {
        self.cfg.sampler == SamplerKind::Ensemble || self.cfg.bracket_selection
    }

    fn eval_seed(&self, config_id: ConfigId) -> u64 {
        mix_seed(self.cfg.seed, config_id)
    }

    /// Forms the next job at time `now` and marks it pending.
    fn next_job(&mut self, now: f64) -> Job {
        let job = match self
            .policy
            .and_then(|p| next_promotion(&mut self.store, &self.cfg.tuner, p, 1, &self.running))
        {
            Some(p) => {
                if self.policy == Some(PromotionPolicy::Delayed) {
                    debug_assert!(p.d_k as u64 >= self.cfg.tuner.eta() * (p.d_next as u64 + 1));
                }
                self.stats.promotions.push(PromotionRecord {
                    config_id: p.config_id,
                    from_level: p.from_level,
                    time: now,
                    d_k: p.d_k,
                    d_next: p.d_next,
                });
                p.into_job()
            }
            None => {
                let bracket = self.choose_bracket();
                let config_id = self.next_id;
                self.next_id += 1;
                let config = self.sample(config_id);
                self.stats.fresh_brackets.push(bracket);
                Job {
                    config_id,
                    config,
                    level: bracket,
                    bracket,
                    kind: JobKind::Fresh,
                }
            }
        };
        let inserted = self.pending.insert(job.config_id, job.config.clone());
        debug_assert!(inserted, "config {} dispatched twice", job.config_id);
        self.running[job.level - 1] += 1;
        job
    }

    fn choose_bracket(&mut self) -> usize {
        if self.cfg.variant == Variant::Random {
            self.cfg.tuner.levels()
        } else if self.cfg.bracket_selection {
            self.allocator.choose_bracket(&mut self.bracket_rng)
        } else {
            1
        }
    }

    fn sample(&mut self, config_id: ConfigId) -> Configuration {
        match self.cfg.sampler {
            SamplerKind::Random => self.obj.space().sample(&mut self.random_rng),
            SamplerKind::Ensemble => {
                self.refit_bases();
                suggest_with(
                    self.obj.space(),
                    &self.store,
                    &self.pending,
                    &self.ensemble,
                    &self.cfg.tuner,
                    &self.cfg.suggest,
                    mix_seed(self.cfg.seed ^ SAMPLER_SALT, config_id),
                )
            }
        }
    }

    /// Refits base surrogates whose training data grew. Small levels refit
    /// on every new point, larger ones after 10% growth.
    fn refit_bases(&mut self) {
        for level in 1..=self.cfg.tuner.levels() {
            let n = self.store.training_data(level).count();
            let last = self.fitted[level - 1];
            if n == last || (n - last) * 10 < last {
                continue;
            }
            let seed = mix_seed(self.cfg.seed ^ FIT_SALT, ((level as u64) << 32) | n as u64);
            let base = BaseSurrogate::fit_measurements(
                self.obj.space(),
                level,
                self.store.training_data(level),
                &self.cfg.suggest.forest,
                seed,
            );
            self.ensemble.set_base(level, base);
            self.fitted[level - 1] = n;
        }
    }

    /// Cost charged for `job` before the worker's slowdown. Resumable
    /// promotions pay only the increment over the previous level.
    fn charged_cost(&self, job: &Job, result: &EvalResult) -> f64 {
        if job.kind != JobKind::Promotion || !self.obj.resumable() {
            return result.cost_seconds;
        }
        let declared = (
            self.obj.cost(&job.config, job.level),
            self.obj.cost(&job.config, job.level - 1),
        );
        match declared {
            (Some(full), Some(prev)) => (full - prev).max(MIN_COST),
            _ => result.cost_seconds * (1.0 - 1.0 / self.cfg.tuner.eta() as f64),
        }
    }

    /// Records a completion. Returns true when the stop target is reached.
    fn complete(
        &mut self,
        job: Job,
        result: EvalResult,
        start: f64,
        end: f64,
        worker: usize,
    ) -> bool {
        let top = self.cfg.tuner.levels();
        let y = if result.failed {
            self.store.failure_penalty()
        } else {
            result.y
        };
        self.store
            .record(Measurement {
                config_id: job.config_id,
                config: job.config,
                y,
                failed: result.failed,
                level: job.level,
                bracket: job.bracket,
                start,
                end,
                worker,
            })
            .expect("job level within range");
        self.pending.remove(job.config_id);
        self.running[job.level - 1] = self.running[job.level - 1].saturating_sub(1);
        if !result.failed && job.level == top {
            self.best_top = Some(self.best_top.map_or(y, |b| b.min(y)));
        }
        self.trajectory.push(TrajectoryRecord {
            wall_clock: end,
            best_y: self.best_top,
            level: job.level,
            config_id: job.config_id,
            bracket: job.bracket,
        });
        self.stats.completed += 1;
        self.stats.end_time = end;
        self.since_refresh += 1;
        if self.learns() && (job.level == top || self.since_refresh >= self.cfg.refresh_every) {
            self.refresh_theta();
        }
        matches!((self.cfg.stop_below, self.best_top), (Some(t), Some(b)) if b <= t)
    }

    fn refresh_theta(&mut self) {
        self.since_refresh = 0;
        self.refit_bases();
        let theta = estimate_theta(
            self.obj.space(),
            &self.store,
            self.ensemble.bases(),
            self.allocator.samples,
            &self.cfg.suggest.forest,
            mix_seed(self.cfg.seed ^ THETA_SALT, self.stats.completed as u64),
        );
        debug!("theta = {theta:?}");
        let top = self.cfg.tuner.levels();
        if self.cfg.bracket_selection && self.store.training_data(top).nth(1).is_some() {
            let w =
                bracket_weights(&theta, &self.cfg.tuner).expect("theta is a probability vector");
            self.allocator.set_weights(w);
        }
        self.ensemble
            .set_theta(theta)
            .expect("theta is a probability vector");
    }

    fn finish(self) -> RunOutput {
        info!(
            "finished: {} completions, {} discarded, best {:?}",
            self.stats.completed, self.stats.discarded, self.best_top
        );
        RunOutput {
            trajectory: self.trajectory,
            store: self.store,
            stats: self.stats,
        }
    }
}

struct InFlight {
    job: Job,
    result: EvalResult,
    start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    worker: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.worker.cmp(&other.worker))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Virtual workers and their completion events.
struct SimWorkers {
    queue: BinaryHeap<Reverse<Event>>,
    slots: Vec<Option<InFlight>>,
    free_since: Vec<f64>,
}

impl SimWorkers {
    fn dispatch(&mut self, coord: &mut Coordinator<'_>, worker: usize, now: f64) {
        let job = coord.next_job(now);
        let result = coord
            .obj
            .evaluate(&job.config, job.level, coord.eval_seed(job.config_id));
        let cost = coord.charged_cost(&job, &result) * coord.cfg.slowdown(worker);
        coord.stats.idle_time += now - self.free_since[worker];
        self.slots[worker] = Some(InFlight {
            job,
            result,
            start: now,
        });
        self.queue.push(Reverse(Event {
            time: now + cost,
            worker,
        }));
        coord.stats.max_running = coord.stats.max_running.max(self.queue.len());
    }
}

fn run_simulated(coord: &mut Coordinator<'_>) {
    let n = coord.cfg.n_workers;
    let budget = coord.cfg.time_budget;
    let mut sim = SimWorkers {
        queue: BinaryHeap::new(),
        slots: (0..n).map(|_| None).collect(),
        free_since: vec![0.0; n],
    };
    for worker in 0..n {
        sim.dispatch(coord, worker, 0.0);
    }
    while let Some(Reverse(event)) = sim.queue.pop() {
        if event.time > budget {
            coord.stats.discarded = sim.queue.len() + 1;
            break;
        }
        let done = sim.slots[event.worker]
            .take()
            .expect("event for a busy worker");
        sim.free_since[event.worker] = event.time;
        if coord.complete(done.job, done.result, done.start, event.time, event.worker) {
            coord.stats.discarded = sim.queue.len();
            break;
        }
        sim.dispatch(coord, event.worker, event.time);
    }
}

fn run_real(coord: &mut Coordinator<'_>) {
    let cfg = coord.cfg;
    let obj = coord.obj;
    let budget = Duration::from_secs_f64(cfg.time_budget);
    let clock = Instant::now();
    let (tx, rx) = mpsc::channel::<(usize, Job, EvalResult, f64)>();

    std::thread::scope(|scope| {
        let mut running = 0usize;
        let submit = |coord: &mut Coordinator<'_>, worker: usize, running: &mut usize| {
            let now = clock.elapsed().as_secs_f64();
            let job = coord.next_job(now);
            let seed = coord.eval_seed(job.config_id);
            let tx = tx.clone();
            *running += 1;
            coord.stats.max_running = coord.stats.max_running.max(*running);
            scope.spawn(move || {
                let result = obj.evaluate(&job.config, job.level, seed);
                let _ = tx.send((worker, job, result, now));
            });
        };
        for worker in 0..cfg.n_workers {
            submit(coord, worker, &mut running);
        }
        while let Some(left) = budget.checked_sub(clock.elapsed()) {
            let Ok((worker, job, result, start)) = rx.recv_timeout(left) else {
                break;
            };
            running -= 1;
            let end = clock.elapsed().as_secs_f64();
            if end > cfg.time_budget {
                break;
            }
            if coord.complete(job, result, start, end, worker) {
                break;
            }
            submit(coord, worker, &mut running);
        }
        coord.stats.discarded = running;
        obj.shutdown();
    });
}

fn run_sync(coord: &mut Coordinator<'_>) -> Result<()> {
    let cfg = coord.cfg;
    let schedules = hyperband_schedule(cfg.tuner.max_resource(), cfg.tuner.eta())?;
    let brackets = match cfg.variant {
        Variant::Sha => &schedules[..1],
        _ => &schedules[..],
    };
    let slowdown = (0..cfg.n_workers).map(|w| cfg.slowdown(w)).collect();
    let mut pool = SyncPool::new(slowdown, cfg.time_budget)?;

    let space = coord.obj.space();
    let mut rng = coord.random_rng.clone();
    let mut next_id = 0;
    let mut fresh = Vec::new();
    let completions = {
        let c = &*coord;
        hyperband_run(
            brackets,
            &mut pool,
            &mut |_| {
                next_id += 1;
                (next_id - 1, space.sample(&mut rng))
            },
            &mut |job| {
                let result = c
                    .obj
                    .evaluate(&job.config, job.level, c.eval_seed(job.config_id));
                EvalResult {
                    cost_seconds: c.charged_cost(job, &result),
                    ..result
                }
            },
            &mut |b| fresh.push(b),
        )?
    };
    coord.next_id = next_id;
    coord.stats.idle_time = pool.idle_time();
    coord.stats.max_running = cfg.n_workers.min(completions.len());
    for c in completions {
        if c.job.kind == JobKind::Promotion {
            let from = c.job.level - 1;
            coord.stats.promotions.push(PromotionRecord {
                config_id: c.job.config_id,
                from_level: from,
                time: c.start,
                d_k: coord.store.count(from),
                d_next: coord.store.count(c.job.level),
            });
            let _ = coord.store.mark_promoted(c.job.config_id, from);
        } else {
            coord.stats.fresh_brackets.push(c.job.bracket);
        }
        coord.pending.insert(c.job.config_id, c.job.config.clone());
        if coord.complete(c.job, c.result, c.start, c.end, c.worker) {
            break;
        }
    }
    Ok(())
}
