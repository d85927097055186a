//! `run`, `compare` and `replay`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use hypertune::exec::{run_experiment, Trajectory, TrajectoryRecord};
use hypertune::scheduler::Variant;

use crate::config::ExperimentConfig;

/// Number of points on the shared time grid written by `compare`.
pub const GRID_POINTS: usize = 101;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub budget_seconds: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(w) = self.workers {
            cfg.n_workers = w;
        }
        if let Some(b) = self.budget_seconds {
            cfg.time_budget = b;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()
    }
}

/// Written to `summary.json` by `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub final_best_y: Vec<Option<f64>>,
    /// Over seeds that reached the top level.
    pub median_final_best_y: Option<f64>,
    pub best_final_best_y: Option<f64>,
    pub target_y: Option<f64>,
    pub time_to_target: Vec<Option<f64>>,
    pub median_time_to_target: Option<f64>,
    pub completed: Vec<usize>,
}

pub fn trajectory_path(dir: &Path, seed: u64, ext: &str) -> PathBuf {
    dir.join(format!("trajectory_seed{seed}.{ext}"))
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Runs every seed of `variant` and writes trajectories and a summary into
/// `out_dir`.
pub fn run_variant(
    cfg: &ExperimentConfig,
    variant: Variant,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<(Summary, Vec<Trajectory>)> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let objective = cfg.objective(base_dir)?;
    let mut trajectories = Vec::new();
    let mut completed = Vec::new();
    for &seed in &cfg.seeds {
        info!("{variant}: seed {seed}");
        let out = run_experiment(&cfg.engine(variant, seed), objective.as_ref())?;
        write_trajectory(&out.trajectory, out_dir, seed)?;
        completed.push(out.stats.completed);
        trajectories.push(out.trajectory);
    }
    let final_best_y: Vec<Option<f64>> = trajectories.iter().map(Trajectory::final_best).collect();
    let time_to_target: Vec<Option<f64>> = match cfg.target_y {
        Some(t) => trajectories.iter().map(|tr| tr.time_to(t)).collect(),
        None => vec![None; trajectories.len()],
    };
    let summary = Summary {
        variant,
        seeds: cfg.seeds.clone(),
        median_final_best_y: median(final_best_y.iter().flatten().copied().collect()),
        best_final_best_y: final_best_y
            .iter()
            .flatten()
            .copied()
            .min_by(f64::total_cmp),
        final_best_y,
        target_y: cfg.target_y,
        median_time_to_target: median(time_to_target.iter().flatten().copied().collect()),
        time_to_target,
        completed,
    };
    let file = File::create(out_dir.join("summary.json"))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok((summary, trajectories))
}

fn write_trajectory(t: &Trajectory, dir: &Path, seed: u64) -> Result<()> {
    let jsonl = trajectory_path(dir, seed, "jsonl");
    t.write_jsonl(BufWriter::new(File::create(&jsonl)?))
        .with_context(|| format!("writing {}", jsonl.display()))?;
    let csv = trajectory_path(dir, seed, "csv");
    t.write_csv(BufWriter::new(File::create(&csv)?))
        .with_context(|| format!("writing {}", csv.display()))?;
    Ok(())
}

/// Median of `v`; the mean of the two middle values for even lengths.
pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<Summary> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    overrides.apply(&mut cfg)?;
    let out = cfg.output_dir.clone();
    let (summary, _) = run_variant(&cfg, cfg.scheduler.variant, &config_dir(config_path), &out)?;
    println!(
        "{}: {} seed(s), median final best y {}, written to {}",
        summary.variant,
        summary.seeds.len(),
        summary
            .median_final_best_y
            .map_or("n/a".to_string(), |v| v.to_string()),
        out.display()
    );
    Ok(summary)
}

/// One row of `compare.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub variant: Variant,
    pub wall_clock: f64,
    /// Mean over seeds that have a top-level value by `wall_clock`.
    pub mean_best_y: Option<f64>,
    pub seeds_reporting: usize,
}

/// Evenly spaced times from 0 to `budget`, inclusive.
pub fn time_grid(budget: f64) -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| budget * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

/// Mean best-so-far across `trajectories` at each grid time.
pub fn align(variant: Variant, trajectories: &[Trajectory], grid: &[f64]) -> Vec<GridRow> {
    grid.iter()
        .map(|&t| {
            let values: Vec<f64> = trajectories.iter().filter_map(|tr| tr.best_at(t)).collect();
            GridRow {
                variant,
                wall_clock: t,
                mean_best_y: (!values.is_empty())
                    .then(|| values.iter().sum::<f64>() / values.len() as f64),
                seeds_reporting: values.len(),
            }
        })
        .collect()
}

/// Runs each variant on the configured objective and seeds. Writes
/// per-variant run outputs under `<out>/<variant>/` and the aligned series
/// to `<out>/compare.csv`.
pub fn cmd_compare(
    config_path: &Path,
    variants: &[String],
    overrides: &Overrides,
) -> Result<Vec<GridRow>> {
    let variants = variants
        .iter()
        .map(|v| v.parse::<Variant>())
        .collect::<Result<Vec<_>, _>>()?;
    anyhow::ensure!(!variants.is_empty(), "no variants given");
    let mut cfg = ExperimentConfig::load(config_path)?;
    overrides.apply(&mut cfg)?;
    let base = config_dir(config_path);
    let grid = time_grid(cfg.time_budget);
    let mut rows = Vec::new();
    for &v in &variants {
        let (_, trajectories) = run_variant(&cfg, v, &base, &cfg.output_dir.join(v.name()))?;
        rows.extend(align(v, &trajectories, &grid));
    }
    let path = cfg.output_dir.join("compare.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    println!(
        "{} variant(s) compared, series written to {}",
        variants.len(),
        path.display()
    );
    Ok(rows)
}

/// Statistics printed by `replay`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayStats {
    pub records: usize,
    pub final_wall_clock: f64,
    pub final_best_y: Option<f64>,
    pub per_level: Vec<usize>,
}

/// Validates a trajectory file (`.csv` or JSON lines) and summarizes it.
pub fn cmd_replay(path: &Path) -> Result<ReplayStats> {
    let origin = path.display().to_string();
    let file = File::open(path).with_context(|| format!("opening {origin}"))?;
    let trajectory = if path.extension().is_some_and(|e| e == "csv") {
        read_csv(file, &origin)?
    } else {
        Trajectory::read_jsonl(BufReader::new(file), &origin)?
    };
    let records = trajectory.records();
    let max_level = records.iter().map(|r| r.level).max().unwrap_or(0);
    let mut per_level = vec![0; max_level];
    for r in records {
        per_level[r.level - 1] += 1;
    }
    let stats = ReplayStats {
        records: records.len(),
        final_wall_clock: records.last().map_or(0.0, |r| r.wall_clock),
        final_best_y: trajectory.final_best(),
        per_level,
    };
    println!("records: {}", stats.records);
    println!("final wall clock: {}", stats.final_wall_clock);
    match stats.final_best_y {
        Some(b) => println!("final best y: {b}"),
        None => println!("final best y: none"),
    }
    for (i, n) in stats.per_level.iter().enumerate() {
        println!("level {}: {n} evaluations", i + 1);
    }
    Ok(stats)
}

fn read_csv(file: File, origin: &str) -> Result<Trajectory> {
    let mut reader = csv::Reader::from_reader(file);
    let mut records = Vec::new();
    for row in reader.deserialize::<TrajectoryRecord>() {
        let record = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            hypertune::Error::Parse {
                path: origin.to_string(),
                line,
                message: format!("invalid record: {e}"),
            }
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(hypertune::Error::Parse {
            path: origin.to_string(),
            line: 0,
            message: "trajectory is empty".into(),
        }
        .into());
    }
    // Header occupies line 1, so record i sits on line i + 1.
    Trajectory::from_records(records).map_err(|e| match e {
        hypertune::Error::Parse { line, message, .. } => hypertune::Error::Parse {
            path: origin.to_string(),
            line: line + 1,
            message,
        }
        .into(),
        other => other.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even_empty() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn grid_endpoints() {
        let g = time_grid(50.0);
        assert_eq!(g.len(), GRID_POINTS);
        assert_eq!((g[0], g[100]), (0.0, 50.0));
    }
}
