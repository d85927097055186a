use hypertune::bench::{load_tabular, EvalResult, NoisyParaboloid, Objective};
use hypertune::exec::{run_experiment, EngineConfig, SamplerKind};
use hypertune::scheduler::Variant;
use hypertune::{Configuration, ParamSpec, SearchSpace, TunerParams};

/// Deterministic objective with a fixed cost per resource unit.
struct UnitCost {
    space: SearchSpace,
    tuner: TunerParams,
    unit: f64,
    resumable: bool,
}

impl UnitCost {
    fn new(eta: u64, r: u64, unit: f64) -> Self {
        Self {
            space: SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0, false).unwrap()])
                .unwrap(),
            tuner: TunerParams::new(eta, r).unwrap(),
            unit,
            resumable: false,
        }
    }
}

impl Objective for UnitCost {
    fn space(&self) -> &SearchSpace {
        &self.space
    }
    fn levels(&self) -> usize {
        self.tuner.levels()
    }
    fn evaluate(&self, config: &Configuration, level: usize, _seed: u64) -> EvalResult {
        let x = self.space.encode(config).unwrap()[0];
        EvalResult::ok((x - 0.3).powi(2), self.cost(config, level).unwrap())
    }
    fn cost(&self, _config: &Configuration, level: usize) -> Option<f64> {
        Some(self.tuner.resource(level) as f64 * self.unit)
    }
    fn resumable(&self) -> bool {
        self.resumable
    }
}

#[test]
fn one_worker_three_unit_evaluations() {
    let obj = UnitCost::new(3, 1, 1.0);
    let cfg = EngineConfig::new(Variant::Asha, obj.tuner, 1, 3.0, 0);
    let out = run_experiment(&cfg, &obj).unwrap();
    assert_eq!(out.store.total(), 3);
    assert_eq!(out.trajectory.len(), 3);
    assert_eq!(out.stats.discarded, 1);
}

#[test]
fn eight_workers_ten_seconds() {
    let obj = UnitCost::new(3, 1, 1.0);
    let cfg = EngineConfig::new(Variant::Dasha, obj.tuner, 8, 10.0, 0);
    let out = run_experiment(&cfg, &obj).unwrap();
    // 8 workers finish a job every second; the 8 jobs that would end at
    // t = 11 are discarded.
    assert_eq!(out.stats.completed, 80);
    assert_eq!(out.stats.discarded, 8);
    assert_eq!(out.stats.max_running, 8);
    assert_eq!(out.stats.idle_time, 0.0);
}

#[test]
fn identical_seeds_identical_trajectories() {
    let t = TunerParams::new(3, 27).unwrap();
    let obj = NoisyParaboloid::new(3, 0.5, t).unwrap();
    for variant in [
        Variant::Dasha,
        Variant::Asha,
        Variant::Hyperband,
        Variant::Random,
    ] {
        let cfg = EngineConfig::new(variant, t, 4, 300.0, 42);
        let a = run_experiment(&cfg, &obj).unwrap();
        let b = run_experiment(&cfg, &obj).unwrap();
        let (mut ja, mut jb) = (Vec::new(), Vec::new());
        a.trajectory.write_jsonl(&mut ja).unwrap();
        b.trajectory.write_jsonl(&mut jb).unwrap();
        assert!(!ja.is_empty());
        assert_eq!(ja, jb, "{variant}");
        a.trajectory.validate().unwrap();
    }
}

#[test]
fn resumable_promotion_charges_increment() {
    for (resumable, expected) in [(true, 2.0), (false, 3.0)] {
        let mut obj = UnitCost::new(3, 3, 1.0);
        obj.resumable = resumable;
        let mut cfg = EngineConfig::new(Variant::Asha, obj.tuner, 1, 100.0, 0);
        cfg.sampler = SamplerKind::Random;
        let out = run_experiment(&cfg, &obj).unwrap();
        let promoted = out.store.group(2).first().expect("some promotion");
        assert_eq!(
            promoted.end - promoted.start,
            expected,
            "resumable={resumable}"
        );
    }
}

#[test]
fn top_level_cost_of_27() {
    let obj = UnitCost::new(3, 27, 1.0);
    let mut cfg = EngineConfig::new(Variant::Random, obj.tuner, 1, 100.0, 0);
    cfg.sampler = SamplerKind::Random;
    let out = run_experiment(&cfg, &obj).unwrap();
    let ends: Vec<f64> = out.store.group(4).iter().map(|m| m.end).collect();
    assert_eq!(ends, [27.0, 54.0, 81.0]);
}

#[test]
fn delayed_promotions_respect_the_delay() {
    let t = TunerParams::new(3, 27).unwrap();
    let obj = NoisyParaboloid::new(2, 0.5, t).unwrap();
    let mut cfg = EngineConfig::new(Variant::Dasha, t, 8, 400.0, 3);
    cfg.sampler = SamplerKind::Random;
    let out = run_experiment(&cfg, &obj).unwrap();
    assert!(!out.stats.promotions.is_empty());
    for p in &out.stats.promotions {
        assert!(p.d_k >= 3 * (p.d_next + 1), "{p:?}");
    }
    assert!(out.stats.max_running <= 8);
}

#[test]
fn promotion_free_traces_match_between_asha_and_dasha() {
    // With R = 1 there is a single level, so nothing is ever promoted.
    let obj = UnitCost::new(3, 1, 1.0);
    let mut asha = EngineConfig::new(Variant::Asha, obj.tuner, 3, 20.0, 9);
    asha.sampler = SamplerKind::Random;
    let mut dasha = asha.clone();
    dasha.variant = Variant::Dasha;
    let a = run_experiment(&asha, &obj).unwrap();
    let d = run_experiment(&dasha, &obj).unwrap();
    assert_eq!(a.trajectory, d.trajectory);
    let configs = |o: &hypertune::exec::RunOutput| {
        o.store.iter().map(|m| m.config.clone()).collect::<Vec<_>>()
    };
    assert_eq!(configs(&a), configs(&d));
}

#[test]
fn straggler_idles_sync_sha_but_not_dasha() {
    let t = TunerParams::new(3, 27).unwrap();
    let obj = NoisyParaboloid::new(2, 0.5, t).unwrap();
    let mut slow = vec![1.0; 8];
    slow[7] = 10.0;
    let mut sha = EngineConfig::new(Variant::Sha, t, 8, 500.0, 1);
    sha.worker_slowdown = slow.clone();
    let mut dasha = EngineConfig::new(Variant::Dasha, t, 8, 500.0, 1);
    dasha.worker_slowdown = slow;
    dasha.sampler = SamplerKind::Random;
    let s = run_experiment(&sha, &obj).unwrap();
    let d = run_experiment(&dasha, &obj).unwrap();
    assert!(s.stats.idle_time > 0.0);
    assert_eq!(d.stats.idle_time, 0.0);
}

#[test]
fn tabular_timestamps_are_cost_prefix_sums() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let mut text = String::from("param a integer 0 9\nlevels 1\ndata\n");
    for a in 0..10 {
        text.push_str(&format!("{a} 1 {} {}\n", a as f64 / 10.0, 1.0 + a as f64));
    }
    std::fs::write(&path, text).unwrap();
    let table = load_tabular(&path).unwrap();
    let mut cfg = EngineConfig::new(
        Variant::Random,
        TunerParams::new(3, 1).unwrap(),
        1,
        1000.0,
        5,
    );
    cfg.sampler = SamplerKind::Random;
    let out = run_experiment(&cfg, &table).unwrap();
    let mut acc = 0.0;
    for (m, r) in out.store.group(1).iter().zip(out.trajectory.records()) {
        acc += table.cost(&m.config, 1).unwrap();
        assert_eq!(r.wall_clock, acc);
    }
    assert!(out.trajectory.len() > 20);
}

#[test]
fn level_mismatch_is_rejected() {
    let obj = UnitCost::new(3, 27, 1.0);
    let cfg = EngineConfig::new(Variant::Asha, TunerParams::new(3, 9).unwrap(), 1, 10.0, 0);
    assert!(run_experiment(&cfg, &obj).is_err());
    let mut bad = EngineConfig::new(Variant::Sha, obj.tuner, 1, 10.0, 0);
    bad.sampler = SamplerKind::Ensemble;
    assert!(run_experiment(&bad, &obj).is_err());
}

#[test]
fn dasha_with_ensemble_improves_over_time() {
    let t = TunerParams::new(3, 27).unwrap();
    let obj = NoisyParaboloid::new(2, 0.2, t).unwrap();
    let cfg = EngineConfig::new(Variant::Dasha, t, 4, 600.0, 11);
    let out = run_experiment(&cfg, &obj).unwrap();
    let best = out.trajectory.final_best().unwrap();
    assert!(best < 0.02, "best {best}");
    let starts = &out.stats.fresh_brackets;
    assert_eq!(&starts[..8], [1, 2, 3, 4, 1, 2, 3, 4]);
    assert!(out.stats.promotions.iter().all(|p| p.from_level < 4));
    assert!(out.store.iter().all(|m| m.level >= m.bracket));
}
