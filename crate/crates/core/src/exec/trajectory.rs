//! Anytime-performance traces: one record per completed evaluation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::ConfigId;

/// `best_y` is the lowest successful top-level value so far, or `None`
/// before the first one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub wall_clock: f64,
    pub best_y: Option<f64>,
    pub level: usize,
    pub config_id: ConfigId,
    pub bracket: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<TrajectoryRecord>) -> Result<Self> {
        let t = Self { records };
        t.validate()?;
        Ok(t)
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TrajectoryRecord) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|p| p.wall_clock <= record.wall_clock));
        self.records.push(record);
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.best_y)
    }

    /// Best value known at time `t`.
    pub fn best_at(&self, t: f64) -> Option<f64> {
        let idx = self.records.partition_point(|r| r.wall_clock <= t);
        idx.checked_sub(1).and_then(|i| self.records[i].best_y)
    }

    /// Earliest time at which `best_y <= target`.
    pub fn time_to(&self, target: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.best_y.is_some_and(|b| b <= target))
            .map(|r| r.wall_clock)
    }

    /// Checks clock and best-value monotonicity. Errors name the 1-based
    /// record number.
    pub fn validate(&self) -> Result<()> {
        check_records(
            self.records.iter().enumerate().map(|(i, r)| (i + 1, r)),
            "trajectory",
        )
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// CSV mirror of the JSON lines; a missing `best_y` is an empty field.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses and validates JSON lines. Blank lines are rejected, as is an
    /// empty input.
    pub fn read_jsonl<R: BufRead>(input: R, origin: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut numbered = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let record: TrajectoryRecord =
                serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: origin.to_string(),
                    line: i + 1,
                    message: format!("invalid record: {e}"),
                })?;
            numbered.push(i + 1);
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: 0,
                message: "trajectory is empty".into(),
            });
        }
        check_records(numbered.into_iter().zip(&records), origin)?;
        Ok(Self { records })
    }
}

fn check_records<'a>(
    records: impl Iterator<Item = (usize, &'a TrajectoryRecord)>,
    origin: &str,
) -> Result<()> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut prev: Option<&TrajectoryRecord> = None;
    for (line, r) in records {
        if !r.wall_clock.is_finite() || r.wall_clock < 0.0 {
            return Err(err(
                line,
                format!("wall_clock {} is not a non-negative number", r.wall_clock),
            ));
        }
        if r.level == 0 || r.bracket == 0 {
            return Err(err(line, "level and bracket are 1-based".into()));
        }
        if let Some(p) = prev {
            if r.wall_clock < p.wall_clock {
                return Err(err(
                    line,
                    format!(
                        "wall_clock decreased from {} to {}",
                        p.wall_clock, r.wall_clock
                    ),
                ));
            }
            match (p.best_y, r.best_y) {
                (Some(a), Some(b)) if b > a => {
                    return Err(err(line, format!("best_y increased from {a} to {b}")));
                }
                (Some(a), None) => {
                    return Err(err(line, format!("best_y reset to null after {a}")))
                }
                _ => {}
            }
        }
        prev = Some(r);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, best: Option<f64>) -> TrajectoryRecord {
        TrajectoryRecord {
            wall_clock: t,
            best_y: best,
            level: 1,
            config_id: 0,
            bracket: 1,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let t = Trajectory::from_records(vec![
            rec(0.5, None),
            rec(1.0, Some(0.3)),
            rec(1.0, Some(0.1)),
        ])
        .unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("{\"wall_clock\":0.5,\"best_y\":null,"),
            "{text}"
        );
        assert_eq!(Trajectory::read_jsonl(&buf[..], "t").unwrap(), t);
    }

    #[test]
    fn csv_mirror() {
        let t = Trajectory::from_records(vec![rec(0.5, None), rec(2.0, Some(0.25))]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "wall_clock,best_y,level,config_id,bracket\n0.5,,1,0,1\n2.0,0.25,1,0,1\n"
        );
    }

    #[test]
    fn rejects_bad_ordering_with_line_numbers() {
        let text = "{\"wall_clock\":1.0,\"best_y\":0.2,\"level\":1,\"config_id\":0,\"bracket\":1}\n\
                    {\"wall_clock\":2.0,\"best_y\":0.5,\"level\":1,\"config_id\":1,\"bracket\":1}\n";
        match Trajectory::read_jsonl(text.as_bytes(), "f").unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("best_y increased"));
            }
            e => panic!("{e}"),
        }
        assert!(Trajectory::read_jsonl(&b""[..], "f").is_err());
        assert!(Trajectory::read_jsonl(&b"{\"wall_clock\":1}\n"[..], "f").is_err());
    }

    #[test]
    fn queries() {
        let t = Trajectory::from_records(vec![
            rec(1.0, None),
            rec(2.0, Some(0.5)),
            rec(4.0, Some(0.1)),
        ])
        .unwrap();
        assert_eq!(t.best_at(0.5), None);
        assert_eq!(t.best_at(3.0), Some(0.5));
        assert_eq!(t.best_at(4.0), Some(0.1));
        assert_eq!(t.time_to(0.2), Some(4.0));
        assert_eq!(t.time_to(0.0), None);
        assert_eq!(t.final_best(), Some(0.1));
    }
}
