use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discard proportion `eta` and maximum resource `R`.
///
/// Resource levels are numbered `1..=levels()`; level `i` trains with
/// `eta^(i-1)` resource units, so the top level uses the largest power of
/// `eta` not exceeding `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTuner", into = "RawTuner")]
pub struct TunerParams {
    eta: u64,
    max_resource: u64,
    levels: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTuner {
    eta: u64,
    max_resource: u64,
}

impl TryFrom<RawTuner> for TunerParams {
    type Error = Error;
    fn try_from(raw: RawTuner) -> Result<Self> {
        Self::new(raw.eta, raw.max_resource)
    }
}

impl From<TunerParams> for RawTuner {
    fn from(t: TunerParams) -> Self {
        RawTuner {
            eta: t.eta,
            max_resource: t.max_resource,
        }
    }
}

impl TunerParams {
    pub fn new(eta: u64, max_resource: u64) -> Result<Self> {
        if eta < 2 {
            return Err(Error::InvalidTuner(format!("eta must be >= 2, got {eta}")));
        }
        if max_resource < 1 {
            return Err(Error::InvalidTuner("max_resource must be >= 1".into()));
        }
        Ok(Self {
            eta,
            max_resource,
            levels: floor_log(max_resource, eta) + 1,
        })
    }

    pub fn eta(&self) -> u64 {
        self.eta
    }

    pub fn max_resource(&self) -> u64 {
        self.max_resource
    }

    /// Number of resource levels `K = floor(log_eta R) + 1`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Resource units at `level` (1-based): `eta^(level-1)`.
    pub fn resource(&self, level: usize) -> u64 {
        debug_assert!((1..=self.levels).contains(&level));
        self.eta.pow(level as u32 - 1)
    }

    pub fn resources(&self) -> Vec<u64> {
        (1..=self.levels).map(|l| self.resource(l)).collect()
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if (1..=self.levels).contains(&level) {
            Ok(())
        } else {
            Err(Error::LevelOutOfRange {
                level,
                levels: self.levels,
            })
        }
    }
}

/// `floor(log_base(x))` in exact integer arithmetic.
pub(crate) fn floor_log(x: u64, base: u64) -> usize {
    let mut n = 0;
    let mut acc = 1u64;
    while let Some(next) = acc.checked_mul(base) {
        if next > x {
            break;
        }
        acc = next;
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_and_resources() {
        let t = TunerParams::new(3, 27).unwrap();
        assert_eq!(t.levels(), 4);
        assert_eq!(t.resources(), vec![1, 3, 9, 27]);
        let t = TunerParams::new(3, 30).unwrap();
        assert_eq!(t.levels(), 4);
        assert_eq!(t.resource(4), 27);
        let t = TunerParams::new(2, 1).unwrap();
        assert_eq!(t.levels(), 1);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(TunerParams::new(1, 27).is_err());
        assert!(TunerParams::new(3, 0).is_err());
        assert!(TunerParams::new(3, 27).unwrap().check_level(5).is_err());
    }

    #[test]
    fn floor_log_exact() {
        assert_eq!(floor_log(27, 3), 3);
        assert_eq!(floor_log(26, 3), 2);
        assert_eq!(floor_log(1, 3), 0);
        assert_eq!(floor_log(u64::MAX, 2), 63);
    }
}
