//! Run configuration: a single JSON document with every default embedded.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bounds::{check_divisor, existence_time_with_divisor, DEFAULT_THRESHOLD_DIVISOR};
use crate::error::{Error, Result};
use crate::evolution::{PicardOptions, TimeGrid};
use crate::lattice::{ball_len, DecayEnvelope, FrequencySystem};

/// Largest admissible count of lattice points in the `2N` ball, which the
/// nonresonance scan enumerates.
pub const MAX_SCAN_POINTS: u128 = 2_000_000;
pub const MAX_INTERVALS: usize = 1 << 16;

/// `t_end`: a number or `"auto"` (the existence time).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EndTime {
    Auto,
    Fixed(f64),
}

impl Serialize for EndTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EndTime::Auto => s.serialize_str("auto"),
            EndTime::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EndTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = EndTime;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"auto\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<EndTime, E> {
                if v == "auto" {
                    Ok(EndTime::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<EndTime, E> {
                Ok(EndTime::Fixed(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<EndTime, E> {
                Ok(EndTime::Fixed(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<EndTime, E> {
                Ok(EndTime::Fixed(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

fn default_nu() -> usize {
    1
}
fn default_omega() -> Vec<f64> {
    vec![1.0]
}
fn default_radius() -> u32 {
    6
}
fn default_one() -> f64 {
    1.0
}
fn default_t_end() -> EndTime {
    EndTime::Auto
}
fn default_intervals() -> usize {
    128
}
fn default_tol() -> f64 {
    1e-10
}
fn default_kmax() -> usize {
    20
}
fn default_divisor() -> u32 {
    DEFAULT_THRESHOLD_DIVISOR
}
fn default_true() -> bool {
    true
}
fn default_substeps() -> usize {
    4
}
fn default_agreement() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_nu")]
    pub nu: usize,
    #[serde(default = "default_omega")]
    pub omega: Vec<f64>,
    #[serde(rename = "N", default = "default_radius")]
    pub radius: u32,
    #[serde(rename = "B", default = "default_one")]
    pub b: f64,
    #[serde(default = "default_one")]
    pub kappa: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_t_end")]
    pub t_end: EndTime,
    #[serde(rename = "J", default = "default_intervals")]
    pub intervals: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    #[serde(default = "default_divisor")]
    pub threshold_divisor: u32,
    #[serde(default = "default_true")]
    pub real_data: bool,
    /// RK4 steps per grid interval in the reference solve.
    #[serde(default = "default_substeps")]
    pub rk4_substeps: usize,
    /// Sup-norm tolerance for Picard vs RK4 agreement.
    #[serde(default = "default_agreement")]
    pub agreement_tol: f64,
    /// Permits `t_end` beyond the existence time.
    #[serde(default)]
    pub allow_beyond_existence: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

fn range_err(what: &'static str, detail: String) -> Error {
    Error::Config(format!("{what}: {detail}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` (an empty string means all defaults), applies `KEY=VAL`
    /// overrides in order and validates the result.
    pub fn from_json_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut value: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        for o in overrides {
            apply_override(&mut value, o.as_ref())?;
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(range_err("nu", "must be at least 1".into()));
        }
        if self.omega.len() != self.nu {
            return Err(range_err(
                "omega",
                format!("has {} components for nu = {}", self.omega.len(), self.nu),
            ));
        }
        if self.radius == 0 || ball_len(self.nu, self.radius.saturating_mul(2)) > MAX_SCAN_POINTS {
            return Err(range_err(
                "N",
                format!("{} is zero or too large for nu = {}", self.radius, self.nu),
            ));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(range_err(
                "B",
                format!("{} is not a finite nonnegative number", self.b),
            ));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(range_err("kappa", format!("{} not in (0, 1]", self.kappa)));
        }
        if let EndTime::Fixed(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(range_err("t_end", format!("{t} is not positive")));
            }
        }
        if self.intervals < 2 || !self.intervals.is_multiple_of(2) || self.intervals > MAX_INTERVALS
        {
            return Err(range_err(
                "J",
                format!("{} must be even and in 2..={MAX_INTERVALS}", self.intervals),
            ));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(range_err("tol", format!("{} is not positive", self.tol)));
        }
        if self.kmax == 0 || self.kmax > 1000 {
            return Err(range_err("kmax", format!("{} not in 1..=1000", self.kmax)));
        }
        check_divisor(self.threshold_divisor).map_err(|e| Error::Config(e.to_string()))?;
        if self.rk4_substeps == 0 || self.rk4_substeps > 1024 {
            return Err(range_err(
                "rk4_substeps",
                format!("{} not in 1..=1024", self.rk4_substeps),
            ));
        }
        if !(self.agreement_tol > 0.0) {
            return Err(range_err(
                "agreement_tol",
                format!("{} is not positive", self.agreement_tol),
            ));
        }
        Ok(())
    }

    pub fn frequency_system(&self) -> Result<FrequencySystem> {
        FrequencySystem::new(self.omega.clone(), self.radius)
    }

    /// Fails when `B = 0`, which only data generation accepts.
    pub fn envelope(&self) -> Result<DecayEnvelope> {
        DecayEnvelope::new(self.b, self.kappa)
    }

    pub fn existence_time(&self) -> Result<f64> {
        existence_time_with_divisor(
            &self.envelope()?,
            &self.frequency_system()?,
            self.threshold_divisor,
        )
    }

    pub fn resolved_t_end(&self) -> Result<f64> {
        match self.t_end {
            EndTime::Auto => self.existence_time(),
            EndTime::Fixed(t) => Ok(t),
        }
    }

    /// Copy with `t_end` replaced by its numeric value.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut out = self.clone();
        out.t_end = EndTime::Fixed(self.resolved_t_end()?);
        Ok(out)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.resolved_t_end()?, self.intervals)
    }

    pub fn picard_options(&self) -> Result<PicardOptions> {
        Ok(PicardOptions {
            tol: self.tol,
            kmax: self.kmax,
            time_limit: if self.allow_beyond_existence {
                None
            } else {
                Some(self.existence_time()?)
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON of the resolved configuration.
    pub fn hash(&self) -> Result<String> {
        let text = serde_json::to_string(&self.resolved()?)?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Splits `KEY=VAL` and stores `VAL` (parsed as JSON, else taken as a string)
/// under `KEY` in the config object.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not KEY=VAL")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override {spec:?} has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

pub fn apply_override(config: &mut Value, spec: &str) -> Result<()> {
    let (key, value) = parse_override(spec)?;
    let obj = config
        .as_object_mut()
        .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
    obj.insert(key, value);
    Ok(())
}
