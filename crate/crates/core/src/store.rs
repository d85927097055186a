//! Measurements grouped by resource level, plus promotion bookkeeping.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::space::Configuration;

pub type ConfigId = u64;

/// One completed evaluation. Lower `y` is better.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub config_id: ConfigId,
    pub config: Configuration,
    pub y: f64,
    /// Failed evaluations carry a penalty `y` and are excluded from
    /// surrogate training.
    pub failed: bool,
    pub level: usize,
    pub bracket: usize,
    pub start: f64,
    pub end: f64,
    pub worker: usize,
}

/// Fidelity-grouped observations `D_1..D_K`.
///
/// Groups are append-only, so a measurement's index within its group is its
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct MeasurementStore {
    groups: Vec<Vec<Measurement>>,
    promoted: HashSet<(ConfigId, usize)>,
}

impl MeasurementStore {
    pub fn new(levels: usize) -> Self {
        Self {
            groups: vec![Vec::new(); levels],
            promoted: HashSet::new(),
        }
    }

    pub fn levels(&self) -> usize {
        self.groups.len()
    }

    pub fn record(&mut self, m: Measurement) -> Result<()> {
        self.check_level(m.level)?;
        if m.end < m.start {
            return Err(Error::Setup(format!(
                "measurement ends ({}) before it starts ({})",
                m.end, m.start
            )));
        }
        self.groups[m.level - 1].push(m);
        Ok(())
    }

    /// `D_level` (1-based).
    pub fn group(&self, level: usize) -> &[Measurement] {
        &self.groups[level - 1]
    }

    /// `|D_level|`, counting failed measurements.
    pub fn count(&self, level: usize) -> usize {
        self.groups.get(level.wrapping_sub(1)).map_or(0, Vec::len)
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Measurement> {
        self.groups.iter().flatten()
    }

    /// Successful measurements at `level`, as `(config, y)` pairs.
    pub fn training_data(&self, level: usize) -> impl Iterator<Item = &Measurement> {
        self.group(level).iter().filter(|m| !m.failed)
    }

    /// Highest level with at least one successful measurement.
    pub fn highest_nonempty_level(&self) -> Option<usize> {
        (1..=self.levels())
            .rev()
            .find(|&l| self.training_data(l).next().is_some())
    }

    pub fn best(&self, level: usize) -> Option<&Measurement> {
        self.training_data(level).min_by(|a, b| a.y.total_cmp(&b.y))
    }

    /// Value recorded for a failed evaluation: one worse than the worst
    /// successful value so far, or `f64::MAX` before any success.
    pub fn failure_penalty(&self) -> f64 {
        self.iter()
            .filter(|m| !m.failed)
            .map(|m| m.y)
            .max_by(f64::total_cmp)
            .map_or(f64::MAX, |worst| worst + 1.0)
    }

    pub fn is_promoted(&self, config_id: ConfigId, level: usize) -> bool {
        self.promoted.contains(&(config_id, level))
    }

    pub fn promoted_count(&self, level: usize) -> usize {
        self.promoted.iter().filter(|(_, l)| *l == level).count()
    }

    pub fn mark_promoted(&mut self, config_id: ConfigId, level: usize) -> Result<()> {
        self.check_level(level)?;
        if !self.promoted.insert((config_id, level)) {
            return Err(Error::AlreadyPromoted { config_id, level });
        }
        Ok(())
    }

    /// Indices into `D_level` sorted best first: by `y`, then earlier
    /// completion, then insertion order.
    pub fn ranking(&self, level: usize) -> Vec<usize> {
        let group = self.group(level);
        let mut idx: Vec<usize> = (0..group.len()).collect();
        idx.sort_by(|&a, &b| rank_cmp(&group[a], &group[b]).then(a.cmp(&b)));
        idx
    }

    /// Unpromoted configurations among the top `floor(|D_level| / eta)` of
    /// `D_level`, best first.
    pub fn top_candidates(&self, level: usize, eta: u64) -> Vec<&Measurement> {
        if level == 0 || level > self.levels() {
            return Vec::new();
        }
        let group = self.group(level);
        let keep = group.len() / eta as usize;
        self.ranking(level)
            .into_iter()
            .take(keep)
            .map(|i| &group[i])
            .filter(|m| !self.is_promoted(m.config_id, level))
            .collect()
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if (1..=self.levels()).contains(&level) {
            Ok(())
        } else {
            Err(Error::LevelOutOfRange {
                level,
                levels: self.levels(),
            })
        }
    }
}

fn rank_cmp(a: &Measurement, b: &Measurement) -> Ordering {
    a.y.total_cmp(&b.y).then(a.end.total_cmp(&b.end))
}
