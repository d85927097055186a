//! Offline evaluation tables.
//!
//! ```text
//! # comments and blank lines are ignored
//! param op categorical conv,pool,skip
//! param width integer 8 64 log
//! levels 3
//! resumable
//! data
//! conv,16 1 0.412 12.5
//! conv,16 2 missing
//! ```
//!
//! Header lines declare the space (discrete parameters only), the number of
//! levels and optionally `resumable`. After `data`, each row is
//! `<config-key> <level> <y> <cost_seconds>` or `<config-key> <level> missing`.
//! Every config in the table must list every level.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{EvalResult, Objective};
use crate::error::{Error, Result};
use crate::space::{Configuration, ParamKind, ParamSpec, SearchSpace};

#[derive(Debug, Clone)]
pub struct TabularBenchmark {
    space: SearchSpace,
    levels: usize,
    resumable: bool,
    /// `(key, level) -> Some((y, cost))`, or `None` when marked missing.
    table: HashMap<(String, usize), Option<(f64, f64)>>,
    /// Mean recorded cost per level, charged for lookups that miss.
    fallback_cost: Vec<f64>,
}

pub fn load_tabular(path: impl AsRef<Path>) -> Result<TabularBenchmark> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    TabularBenchmark::parse(&text, &path.display().to_string())
}

impl TabularBenchmark {
    /// Parses table text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };

        let mut params = Vec::new();
        let mut levels = None;
        let mut resumable = false;
        let mut space = None;
        let mut table = HashMap::new();
        // Levels seen per key, with the line that introduced the key.
        let mut seen: BTreeMap<String, (usize, Vec<bool>)> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();

            let Some(space) = space.as_ref() else {
                match fields[0] {
                    "param" => params.push(parse_param(&fields[1..]).map_err(|m| err(line_no, m))?),
                    "levels" => {
                        let k = fields
                            .get(1)
                            .and_then(|s| s.parse::<usize>().ok())
                            .filter(|&k| k >= 1 && fields.len() == 2)
                            .ok_or_else(|| {
                                err(line_no, "expected `levels <positive integer>`".into())
                            })?;
                        levels = Some(k);
                    }
                    "resumable" => resumable = true,
                    "data" => {
                        if levels.is_none() {
                            return Err(err(
                                line_no,
                                "`levels` must be declared before `data`".into(),
                            ));
                        }
                        space = Some(
                            SearchSpace::new(std::mem::take(&mut params))
                                .map_err(|e| err(line_no, e.to_string()))?,
                        );
                    }
                    other => {
                        return Err(err(line_no, format!("unknown header directive `{other}`")))
                    }
                }
                continue;
            };

            let k = levels.expect("checked at `data`");
            if fields.len() != 3 && fields.len() != 4 {
                return Err(err(
                    line_no,
                    format!(
                        "expected `<key> <level> <y> <cost>`, got {} fields",
                        fields.len()
                    ),
                ));
            }
            let key = canonical_key(space, fields[0]).map_err(|m| err(line_no, m))?;
            let level: usize = fields[1]
                .parse()
                .ok()
                .filter(|l| (1..=k).contains(l))
                .ok_or_else(|| err(line_no, format!("level `{}` not in 1..={k}", fields[1])))?;
            let entry = match fields[2..] {
                ["missing"] => None,
                [y, cost] => {
                    let y: f64 = y
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| err(line_no, format!("invalid y `{y}`")))?;
                    let cost: f64 = cost
                        .parse()
                        .ok()
                        .filter(|c: &f64| c.is_finite() && *c > 0.0)
                        .ok_or_else(|| {
                            err(line_no, format!("cost `{cost}` must be a positive number"))
                        })?;
                    Some((y, cost))
                }
                _ => return Err(err(line_no, "expected `<y> <cost>` or `missing`".into())),
            };
            let slot = seen
                .entry(key.clone())
                .or_insert_with(|| (line_no, vec![false; k]));
            if std::mem::replace(&mut slot.1[level - 1], true) {
                return Err(err(
                    line_no,
                    format!("duplicate row for `{key}` at level {level}"),
                ));
            }
            table.insert((key, level), entry);
        }

        let Some(space) = space else {
            return Err(err(
                text.lines().count().max(1),
                "missing `data` section".into(),
            ));
        };
        let levels = levels.expect("checked at `data`");
        for (key, (line, present)) in &seen {
            if let Some(gap) = present.iter().position(|p| !p) {
                return Err(err(
                    *line,
                    format!("config `{key}` has no row for level {}", gap + 1),
                ));
            }
        }

        let mut fallback_cost = vec![(0.0, 0usize); levels];
        for ((_, level), entry) in &table {
            if let Some((_, cost)) = entry {
                fallback_cost[level - 1].0 += cost;
                fallback_cost[level - 1].1 += 1;
            }
        }
        let fallback_cost = fallback_cost
            .into_iter()
            .map(|(sum, n)| if n == 0 { 1.0 } else { sum / n as f64 })
            .collect();

        Ok(Self {
            space,
            levels,
            resumable,
            table,
            fallback_cost,
        })
    }

    /// Number of distinct configurations in the table.
    pub fn len(&self) -> usize {
        self.table.len() / self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Stored `(y, cost)` for a configuration, or `None` when absent or
    /// marked missing.
    pub fn lookup(&self, config: &Configuration, level: usize) -> Option<(f64, f64)> {
        let key = self.space.render_key(config);
        self.table.get(&(key, level)).copied().flatten()
    }

    /// All configurations in the table, in key order.
    pub fn configs(&self) -> Vec<Configuration> {
        let mut keys: Vec<&String> = self
            .table
            .keys()
            .filter(|(_, l)| *l == 1)
            .map(|(k, _)| k)
            .collect();
        keys.sort();
        keys.into_iter()
            .map(|k| self.space.parse_key(k).expect("keys validated at load"))
            .collect()
    }
}

impl Objective for TabularBenchmark {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn levels(&self) -> usize {
        self.levels
    }

    fn evaluate(&self, config: &Configuration, level: usize, _seed: u64) -> EvalResult {
        match self.lookup(config, level) {
            Some((y, cost)) => EvalResult::ok(y, cost),
            None => EvalResult::failed(
                self.fallback_cost
                    .get(level.wrapping_sub(1))
                    .copied()
                    .unwrap_or(1.0),
            ),
        }
    }

    fn cost(&self, config: &Configuration, level: usize) -> Option<f64> {
        self.lookup(config, level).map(|(_, c)| c)
    }

    fn resumable(&self) -> bool {
        self.resumable
    }

    fn optimum(&self) -> Option<f64> {
        self.table
            .iter()
            .filter(|((_, l), _)| *l == self.levels)
            .filter_map(|(_, e)| e.map(|(y, _)| y))
            .min_by(f64::total_cmp)
    }

    fn true_value(&self, config: &Configuration) -> Option<f64> {
        self.lookup(config, self.levels).map(|(y, _)| y)
    }
}

fn parse_param(fields: &[&str]) -> std::result::Result<ParamSpec, String> {
    let (name, kind) = match fields {
        [name, kind, ..] => (*name, *kind),
        _ => return Err("expected `param <name> <kind> ...`".into()),
    };
    let spec = match (kind, &fields[2..]) {
        ("categorical", [choices]) => ParamSpec::categorical(name, choices.split(',')),
        ("integer", [lo, hi, rest @ ..]) => {
            let log = match rest {
                [] => false,
                ["log"] => true,
                _ => return Err(format!("unexpected trailing fields for parameter `{name}`")),
            };
            let lo = lo
                .parse()
                .map_err(|_| format!("invalid lower bound `{lo}` for `{name}`"))?;
            let hi = hi
                .parse()
                .map_err(|_| format!("invalid upper bound `{hi}` for `{name}`"))?;
            ParamSpec::integer(name, lo, hi, log)
        }
        ("continuous", _) => {
            return Err(format!(
                "parameter `{name}`: tables support only integer and categorical parameters"
            ))
        }
        _ => return Err(format!("malformed declaration for parameter `{name}`")),
    };
    spec.map_err(|e| e.to_string())
}

/// Re-renders a key so that equivalent spellings collide.
fn canonical_key(space: &SearchSpace, key: &str) -> std::result::Result<String, String> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != space.dim() {
        return Err(format!(
            "key `{key}` has {} fields, expected {}",
            parts.len(),
            space.dim()
        ));
    }
    for (p, text) in space.params().iter().zip(&parts) {
        if let ParamKind::Categorical { choices } = p.kind() {
            if !choices.iter().any(|c| c == text) {
                return Err(format!(
                    "unknown value `{text}` for parameter `{}`",
                    p.name()
                ));
            }
        }
    }
    let config = space.parse_key(key).map_err(|e| e.to_string())?;
    Ok(space.render_key(&config))
}
