//! Search-space definition, configuration values, and the numeric encoding
//! that surrogates consume.
//!
//! Continuous and integer parameters map onto `[0, 1]` (after a log transform
//! when `log_scale` is set); categorical parameters are one-hot encoded. The
//! encoded width of a space is therefore the number of numeric parameters plus
//! the total number of categorical choices.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Continuous {
        lower: f64,
        upper: f64,
        log_scale: bool,
    },
    Integer {
        lower: i64,
        upper: i64,
        log_scale: bool,
    },
    Categorical {
        choices: Vec<String>,
    },
}

/// A single named hyper-parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParamSpec", into = "RawParamSpec")]
pub struct ParamSpec {
    name: String,
    kind: ParamKind,
}

impl ParamSpec {
    pub fn continuous(
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        log_scale: bool,
    ) -> Result<Self> {
        Self::new(
            name,
            ParamKind::Continuous {
                lower,
                upper,
                log_scale,
            },
        )
    }

    pub fn integer(
        name: impl Into<String>,
        lower: i64,
        upper: i64,
        log_scale: bool,
    ) -> Result<Self> {
        Self::new(
            name,
            ParamKind::Integer {
                lower,
                upper,
                log_scale,
            },
        )
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        choices: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        Self::new(
            name,
            ParamKind::Categorical {
                choices: choices.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn new(name: impl Into<String>, kind: ParamKind) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidSpace(
                "parameter name must be non-empty".into(),
            ));
        }
        let invalid = |msg: String| Err(Error::InvalidSpace(format!("parameter `{name}`: {msg}")));
        match &kind {
            ParamKind::Continuous {
                lower,
                upper,
                log_scale,
            } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return invalid("bounds must be finite".into());
                }
                if lower >= upper {
                    return invalid(format!("lower {lower} must be < upper {upper}"));
                }
                if *log_scale && *lower <= 0.0 {
                    return invalid("log_scale requires lower > 0".into());
                }
            }
            ParamKind::Integer {
                lower,
                upper,
                log_scale,
            } => {
                if lower >= upper {
                    return invalid(format!("lower {lower} must be < upper {upper}"));
                }
                if *log_scale && *lower <= 0 {
                    return invalid("log_scale requires lower > 0".into());
                }
            }
            ParamKind::Categorical { choices } => {
                if choices.is_empty() {
                    return invalid("choices must be non-empty".into());
                }
                let mut seen = HashSet::new();
                for c in choices {
                    if !seen.insert(c.as_str()) {
                        return invalid(format!("duplicate choice `{c}`"));
                    }
                    if c.is_empty() || c.contains([',', ' ', '\t']) {
                        return invalid(format!(
                            "choice `{c}` must be non-empty and free of commas and whitespace"
                        ));
                    }
                }
            }
        }
        Ok(Self { name, kind })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ParamKind {
        &self.kind
    }

    /// Number of encoded columns this parameter occupies.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            ParamKind::Categorical { choices } => choices.len(),
            _ => 1,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match &self.kind {
            ParamKind::Continuous {
                lower,
                upper,
                log_scale: false,
            } => ParamValue::Real(rng.random_range(*lower..=*upper)),
            ParamKind::Continuous {
                lower,
                upper,
                log_scale: true,
            } => ParamValue::Real(
                rng.random_range(lower.ln()..=upper.ln())
                    .exp()
                    .clamp(*lower, *upper),
            ),
            ParamKind::Integer {
                lower,
                upper,
                log_scale: false,
            } => ParamValue::Int(rng.random_range(*lower..=*upper)),
            ParamKind::Integer {
                lower,
                upper,
                log_scale: true,
            } => {
                // Log-uniform over the half-open cells around each integer.
                let lo = (*lower as f64 - 0.5).max(0.5).ln();
                let hi = (*upper as f64 + 0.5).ln();
                let v = rng.random_range(lo..hi).exp().round() as i64;
                ParamValue::Int(v.clamp(*lower, *upper))
            }
            ParamKind::Categorical { choices } => {
                ParamValue::Choice(rng.random_range(0..choices.len()))
            }
        }
    }

    fn unit_of(&self, value: &ParamValue) -> Option<f64> {
        match (&self.kind, value) {
            (
                ParamKind::Continuous {
                    lower,
                    upper,
                    log_scale,
                },
                ParamValue::Real(v),
            ) => Some(to_unit(*v, *lower, *upper, *log_scale)),
            (
                ParamKind::Integer {
                    lower,
                    upper,
                    log_scale,
                },
                ParamValue::Int(v),
            ) => Some(to_unit(*v as f64, *lower as f64, *upper as f64, *log_scale)),
            _ => None,
        }
    }

    fn value_at(&self, u: f64) -> ParamValue {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            ParamKind::Continuous {
                lower,
                upper,
                log_scale,
            } => ParamValue::Real(from_unit(u, *lower, *upper, *log_scale).clamp(*lower, *upper)),
            ParamKind::Integer {
                lower,
                upper,
                log_scale,
            } => {
                let v = from_unit(u, *lower as f64, *upper as f64, *log_scale).round() as i64;
                ParamValue::Int(v.clamp(*lower, *upper))
            }
            ParamKind::Categorical { .. } => unreachable!("categorical params are one-hot encoded"),
        }
    }

    fn check(&self, value: &ParamValue) -> Result<()> {
        let ok = match (&self.kind, value) {
            (ParamKind::Continuous { lower, upper, .. }, ParamValue::Real(v)) => {
                v.is_finite() && *v >= *lower && *v <= *upper
            }
            (ParamKind::Integer { lower, upper, .. }, ParamValue::Int(v)) => {
                *v >= *lower && *v <= *upper
            }
            (ParamKind::Categorical { choices }, ParamValue::Choice(i)) => *i < choices.len(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigMismatch(format!(
                "value {value:?} invalid for parameter `{}`",
                self.name
            )))
        }
    }

    fn render(&self, value: &ParamValue) -> String {
        match (&self.kind, value) {
            (ParamKind::Categorical { choices }, ParamValue::Choice(i)) => choices[*i].clone(),
            (_, ParamValue::Real(v)) => format!("{v:?}"),
            (_, ParamValue::Int(v)) => v.to_string(),
            (_, ParamValue::Choice(i)) => i.to_string(),
        }
    }

    fn parse_value(&self, text: &str) -> Option<ParamValue> {
        let value = match &self.kind {
            ParamKind::Continuous { .. } => ParamValue::Real(text.parse().ok()?),
            ParamKind::Integer { .. } => ParamValue::Int(text.parse().ok()?),
            ParamKind::Categorical { choices } => {
                ParamValue::Choice(choices.iter().position(|c| c == text)?)
            }
        };
        self.check(&value).ok().map(|_| value)
    }
}

fn to_unit(v: f64, lower: f64, upper: f64, log_scale: bool) -> f64 {
    let u = if log_scale {
        (v.ln() - lower.ln()) / (upper.ln() - lower.ln())
    } else {
        (v - lower) / (upper - lower)
    };
    u.clamp(0.0, 1.0)
}

fn from_unit(u: f64, lower: f64, upper: f64, log_scale: bool) -> f64 {
    if log_scale {
        (lower.ln() + u * (upper.ln() - lower.ln())).exp()
    } else {
        lower + u * (upper - lower)
    }
}

/// Serialized form of a parameter, with the field names used in experiment
/// config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParamSpec {
    name: String,
    kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    log_scale: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Continuous,
    Integer,
    Categorical,
}

impl TryFrom<RawParamSpec> for ParamSpec {
    type Error = Error;

    fn try_from(raw: RawParamSpec) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidSpace(format!("parameter `{}`: {msg}", raw.name));
        let bounds = || match (raw.lower, raw.upper) {
            (Some(l), Some(u)) => Ok((l, u)),
            _ => Err(bad("`lower` and `upper` are required")),
        };
        let kind = match raw.kind {
            RawKind::Continuous | RawKind::Integer if raw.choices.is_some() => {
                return Err(bad("`choices` only applies to categorical parameters"))
            }
            RawKind::Continuous => {
                let (lower, upper) = bounds()?;
                ParamKind::Continuous {
                    lower,
                    upper,
                    log_scale: raw.log_scale,
                }
            }
            RawKind::Integer => {
                let (lower, upper) = bounds()?;
                if lower.fract() != 0.0 || upper.fract() != 0.0 {
                    return Err(bad("integer bounds must be whole numbers"));
                }
                ParamKind::Integer {
                    lower: lower as i64,
                    upper: upper as i64,
                    log_scale: raw.log_scale,
                }
            }
            RawKind::Categorical => {
                if raw.lower.is_some() || raw.upper.is_some() || raw.log_scale {
                    return Err(bad(
                        "bounds and log_scale do not apply to categorical parameters",
                    ));
                }
                ParamKind::Categorical {
                    choices: raw
                        .choices
                        .clone()
                        .ok_or_else(|| bad("`choices` is required"))?,
                }
            }
        };
        ParamSpec::new(raw.name, kind)
    }
}

impl From<ParamSpec> for RawParamSpec {
    fn from(p: ParamSpec) -> Self {
        let mut raw = RawParamSpec {
            name: p.name,
            kind: RawKind::Categorical,
            lower: None,
            upper: None,
            log_scale: false,
            choices: None,
        };
        match p.kind {
            ParamKind::Continuous {
                lower,
                upper,
                log_scale,
            } => {
                raw.kind = RawKind::Continuous;
                raw.lower = Some(lower);
                raw.upper = Some(upper);
                raw.log_scale = log_scale;
            }
            ParamKind::Integer {
                lower,
                upper,
                log_scale,
            } => {
                raw.kind = RawKind::Integer;
                raw.lower = Some(lower as f64);
                raw.upper = Some(upper as f64);
                raw.log_scale = log_scale;
            }
            ParamKind::Categorical { choices } => raw.choices = Some(choices),
        }
        raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Real(f64),
    Int(i64),
    /// Index into the parameter's `choices`.
    Choice(usize),
}

/// One point of a [`SearchSpace`]; values are stored in the space's
/// parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    values: Vec<ParamValue>,
}

impl Configuration {
    pub fn new(values: Vec<ParamValue>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[ParamValue] {
        &self.values
    }

    pub fn get(&self, space: &SearchSpace, name: &str) -> Option<ParamValue> {
        space
            .index_of(name)
            .and_then(|i| self.values.get(i).copied())
    }
}

/// An ordered, non-empty list of uniquely named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamSpec>", into = "Vec<ParamSpec>")]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
}

impl TryFrom<Vec<ParamSpec>> for SearchSpace {
    type Error = Error;

    fn try_from(params: Vec<ParamSpec>) -> Result<Self> {
        Self::new(params)
    }
}

impl From<SearchSpace> for Vec<ParamSpec> {
    fn from(s: SearchSpace) -> Self {
        s.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidSpace(
                "at least one parameter is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate parameter name `{}`",
                    p.name
                )));
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn encoded_dim(&self) -> usize {
        self.params.iter().map(ParamSpec::encoded_width).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Draws a configuration uniformly (log-uniformly for `log_scale`
    /// parameters).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        Configuration {
            values: self.params.iter().map(|p| p.sample(rng)).collect(),
        }
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.values.len() != self.params.len() {
            return Err(Error::ConfigMismatch(format!(
                "expected {} values, got {}",
                self.params.len(),
                config.values.len()
            )));
        }
        self.params
            .iter()
            .zip(&config.values)
            .try_for_each(|(p, v)| p.check(v))
    }

    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        self.validate(config)?;
        let mut out = Vec::with_capacity(self.encoded_dim());
        self.encode_into(config, &mut out);
        Ok(out)
    }

    /// Appends the encoding of an already validated configuration.
    pub(crate) fn encode_into(&self, config: &Configuration, out: &mut Vec<f64>) {
        for (p, v) in self.params.iter().zip(&config.values) {
            match (&p.kind, v) {
                (ParamKind::Categorical { choices }, ParamValue::Choice(i)) => {
                    out.extend((0..choices.len()).map(|j| if j == *i { 1.0 } else { 0.0 }));
                }
                _ => out.push(p.unit_of(v).expect("validated configuration")),
            }
        }
    }

    /// Inverse of [`encode`](Self::encode). Integers are rounded and
    /// categorical blocks decode to their largest entry.
    pub fn decode(&self, encoded: &[f64]) -> Result<Configuration> {
        if encoded.len() != self.encoded_dim() {
            return Err(Error::ConfigMismatch(format!(
                "expected encoded length {}, got {}",
                self.encoded_dim(),
                encoded.len()
            )));
        }
        let mut values = Vec::with_capacity(self.params.len());
        let mut at = 0;
        for p in &self.params {
            let width = p.encoded_width();
            let block = &encoded[at..at + width];
            at += width;
            values.push(match p.kind {
                ParamKind::Categorical { .. } => {
                    let best =
                        block
                            .iter()
                            .enumerate()
                            .fold(0, |best, (i, v)| if *v > block[best] { i } else { best });
                    ParamValue::Choice(best)
                }
                _ => p.value_at(block[0]),
            });
        }
        Ok(Configuration { values })
    }

    /// Returns a copy of `config` with exactly one parameter changed.
    ///
    /// Numeric parameters move by a Gaussian step of standard deviation
    /// `scale` on the unit axis; categorical ones switch to a different
    /// choice.
    pub fn neighbor<R: Rng + ?Sized>(
        &self,
        config: &Configuration,
        scale: f64,
        rng: &mut R,
    ) -> Configuration {
        let mut values = config.values.clone();
        let i = rng.random_range(0..self.params.len());
        let p = &self.params[i];
        values[i] = match (&p.kind, config.values[i]) {
            (ParamKind::Categorical { choices }, ParamValue::Choice(c)) => {
                if choices.len() == 1 {
                    ParamValue::Choice(c)
                } else {
                    let shift = rng.random_range(1..choices.len());
                    ParamValue::Choice((c + shift) % choices.len())
                }
            }
            (kind, v) => {
                let u = p.unit_of(&v).expect("validated configuration");
                let step = Normal::new(0.0, scale).expect("positive scale").sample(rng);
                let moved = p.value_at(u + step);
                match (kind, moved, v) {
                    (
                        ParamKind::Integer { lower, upper, .. },
                        ParamValue::Int(m),
                        ParamValue::Int(old),
                    ) if m == old => {
                        let dir = if step >= 0.0 { 1 } else { -1 };
                        let next = old + dir;
                        ParamValue::Int(if next < *lower || next > *upper {
                            old - dir
                        } else {
                            next
                        })
                    }
                    _ => moved,
                }
            }
        };
        Configuration { values }
    }

    /// Canonical text key: values in parameter order, comma separated.
    /// Reals use the shortest round-tripping representation.
    pub fn render_key(&self, config: &Configuration) -> String {
        let mut out = String::new();
        for (i, (p, v)) in self.params.iter().zip(&config.values).enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", p.render(v));
        }
        out
    }

    pub fn parse_key(&self, key: &str) -> Result<Configuration> {
        let parts: Vec<&str> = key.split(',').collect();
        if parts.len() != self.params.len() {
            return Err(Error::ConfigMismatch(format!(
                "key `{key}` has {} fields, expected {}",
                parts.len(),
                self.params.len()
            )));
        }
        let values = self
            .params
            .iter()
            .zip(parts)
            .map(|(p, text)| {
                p.parse_value(text).ok_or_else(|| {
                    Error::ConfigMismatch(format!(
                        "value `{text}` invalid for parameter `{}`",
                        p.name
                    ))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Configuration { values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mixed_space() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::continuous("lr", 1e-4, 1.0, true).unwrap(),
            ParamSpec::continuous("momentum", 0.0, 1.0, false).unwrap(),
            ParamSpec::integer("depth", 1, 12, false).unwrap(),
            ParamSpec::integer("width", 8, 512, true).unwrap(),
            ParamSpec::categorical("opt", ["sgd", "adam", "rmsprop"]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn categorical_sample_in_domain() {
        let space =
            SearchSpace::new(vec![ParamSpec::categorical("c", ["a", "b"]).unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = space.sample(&mut rng);
        assert!(matches!(c.values()[0], ParamValue::Choice(0 | 1)));
    }

    #[test]
    fn log_scale_sampling_is_uniform_in_log_domain() {
        let space =
            SearchSpace::new(vec![ParamSpec::continuous("x", 1.0, 1000.0, true).unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let below = (0..n)
            .filter(|_| match space.sample(&mut rng).values()[0] {
                ParamValue::Real(v) => v <= 10f64.powf(1.5),
                _ => unreachable!(),
            })
            .count();
        let frac = below as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.05, "fraction {frac}");
    }

    #[test]
    fn integer_sampling_is_uniform() {
        let space = SearchSpace::new(vec![ParamSpec::integer("k", 0, 3, false).unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            match space.sample(&mut rng).values()[0] {
                ParamValue::Int(v) => counts[v as usize] += 1,
                _ => unreachable!(),
            }
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 0.25).abs() < 0.03, "{counts:?}");
        }
    }

    #[test]
    fn encode_examples() {
        let s =
            SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 10.0, false).unwrap()]).unwrap();
        assert_eq!(
            s.encode(&Configuration::new(vec![ParamValue::Real(5.0)]))
                .unwrap(),
            vec![0.5]
        );

        let s =
            SearchSpace::new(vec![ParamSpec::continuous("x", 1.0, 100.0, true).unwrap()]).unwrap();
        let e = s
            .encode(&Configuration::new(vec![ParamValue::Real(10.0)]))
            .unwrap();
        assert!((e[0] - 0.5).abs() < 1e-12);

        let s =
            SearchSpace::new(vec![ParamSpec::categorical("c", ["a", "b", "c"]).unwrap()]).unwrap();
        assert_eq!(
            s.encode(&Configuration::new(vec![ParamValue::Choice(1)]))
                .unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn encode_rejects_mismatch() {
        let s = mixed_space();
        assert!(s
            .encode(&Configuration::new(vec![ParamValue::Real(0.1)]))
            .is_err());
        let mut c = s.sample(&mut ChaCha8Rng::seed_from_u64(0));
        c.values[2] = ParamValue::Real(3.0);
        assert!(matches!(s.encode(&c), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ParamSpec::continuous("", 0.0, 1.0, false).is_err());
        assert!(ParamSpec::continuous("x", 1.0, 1.0, false).is_err());
        assert!(ParamSpec::continuous("x", 0.0, 1.0, true).is_err());
        assert!(ParamSpec::integer("x", 0, 5, true).is_err());
        assert!(ParamSpec::categorical("x", Vec::<String>::new()).is_err());
        assert!(ParamSpec::categorical("x", ["a", "a"]).is_err());
        let p = ParamSpec::continuous("x", 0.0, 1.0, false).unwrap();
        assert!(SearchSpace::new(vec![p.clone(), p]).is_err());
        assert!(SearchSpace::new(vec![]).is_err());
    }

    #[test]
    fn key_round_trip() {
        let s = mixed_space();
        let c = s.sample(&mut ChaCha8Rng::seed_from_u64(3));
        let key = s.render_key(&c);
        assert_eq!(s.parse_key(&key).unwrap(), c);
        assert!(s.parse_key("1,2").is_err());
    }

    #[test]
    fn serde_uses_flat_param_fields() {
        let json = r#"[{"name":"lr","kind":"continuous","lower":0.001,"upper":1.0,"log_scale":true},
                       {"name":"opt","kind":"categorical","choices":["a","b"]}]"#;
        let s: SearchSpace = serde_json::from_str(json).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.encoded_dim(), 3);
        let bad = r#"[{"name":"x","kind":"integer","lower":0.5,"upper":3}]"#;
        assert!(serde_json::from_str::<SearchSpace>(bad).is_err());
        let unknown = r#"[{"name":"x","kind":"integer","lower":0,"upper":3,"step":1}]"#;
        assert!(serde_json::from_str::<SearchSpace>(unknown).is_err());
    }

    proptest! {
        #[test]
        fn encoding_stays_in_unit_cube(seed in any::<u64>()) {
            let s = mixed_space();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = s.sample(&mut rng);
            let e = s.encode(&c).unwrap();
            prop_assert_eq!(e.len(), s.encoded_dim());
            prop_assert!(e.iter().all(|v| (0.0..=1.0).contains(v)));
            let n = s.neighbor(&c, 0.2, &mut rng);
            prop_assert!(s.validate(&n).is_ok());
        }

        #[test]
        fn decode_inverts_encode_on_grid_points(seed in any::<u64>()) {
            // Grid points: integers and categoricals exactly; reals up to rounding.
            let s = mixed_space();
            let c = s.sample(&mut ChaCha8Rng::seed_from_u64(seed));
            let d = s.decode(&s.encode(&c).unwrap()).unwrap();
            for (a, b) in c.values().iter().zip(d.values()) {
                match (a, b) {
                    (ParamValue::Real(x), ParamValue::Real(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0)),
                    _ => prop_assert_eq!(a, b),
                }
            }
        }

        #[test]
        fn sampling_is_deterministic(seed in any::<u64>()) {
            let s = mixed_space();
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                prop_assert_eq!(s.sample(&mut a), s.sample(&mut b));
            }
        }
    }
}
