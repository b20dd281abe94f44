use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::potentials::{PotentialKind, PotentialSpec};

/// A scalar applied to every axis, or one value per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Copy> PerAxis<T> {
    fn expand(&self, d: usize, what: &str) -> Result<Vec<T>> {
        match self {
            Self::All(v) => Ok(vec![*v; d]),
            Self::Each(v) if v.len() == d => Ok(v.clone()),
            Self::Each(v) => Err(Error::Config(format!("{what}: expected {d} entries, got {}", v.len()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width `L` of the box `[-L, L)^d`.
    pub extent: PerAxis<f64>,
    pub points: PerAxis<usize>,
}

/// `T0` either derived from the smallness parameter or given outright.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum T0Policy {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum T0Raw {
    Number(f64),
    Word(String),
}

impl Serialize for T0Policy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Self::Auto => T0Raw::Word("auto".into()).serialize(s),
            Self::Fixed(t) => T0Raw::Number(t).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for T0Policy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match T0Raw::deserialize(d)? {
            T0Raw::Number(t) if t > 0.0 && t.is_finite() => Ok(Self::Fixed(t)),
            T0Raw::Number(t) => Err(serde::de::Error::custom(format!("T0 = {t} must be positive"))),
            T0Raw::Word(w) if w == "auto" => Ok(Self::Auto),
            T0Raw::Word(w) => Err(serde::de::Error::custom(format!("T0 must be a number or \"auto\", got {w:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T0", default)]
    pub t0: T0Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl TimeConfig {
    /// `T0` under this policy, with `auto` delegated to `select`.
    pub fn resolve(&self, select: impl FnOnce() -> f64) -> f64 {
        match self.t0 {
            T0Policy::Auto => select(),
            T0Policy::Fixed(t) => t,
        }
    }

    pub fn dt_or(&self, default: f64) -> f64 {
        self.dt.unwrap_or(default)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn free() -> PotentialKind {
    PotentialKind::Free
}

/// One experiment run, as read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub dimension: usize,
    pub grid: GridConfig,
    #[serde(default = "free")]
    pub potential: PotentialKind,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, dimension: usize, extent: f64, points: usize) -> Self {
        Self {
            experiment: experiment.into(),
            dimension,
            grid: GridConfig { extent: PerAxis::All(extent), points: PerAxis::All(points) },
            potential: PotentialKind::Free,
            time: TimeConfig::default(),
            params: Map::new(),
            output: OutputConfig::default(),
        }
    }

    pub fn with_potential(mut self, kind: PotentialKind) -> Self {
        self.potential = kind;
        self
    }

    pub fn with_grid(mut self, extent: Vec<f64>, points: Vec<usize>) -> Self {
        self.grid = GridConfig { extent: PerAxis::Each(extent), points: PerAxis::Each(points) };
        self
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.time.t0 = T0Policy::Fixed(t0);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.time.dt = Some(dt);
        self
    }

    /// Sets `params[key]`; panics only if `value` cannot be represented as JSON.
    pub fn with_param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.into(), serde_json::to_value(value).expect("JSON-representable parameter"));
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.potential()?;
        if let Some(dt) = self.time.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("dt = {dt} must be positive")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let d = self.dimension;
        if !(1..=3).contains(&d) {
            return Err(Error::Config(format!("dimension {d} not in 1..=3")));
        }
        GridSpec::anisotropic(self.grid.extent.expand(d, "grid.extent")?, self.grid.points.expand(d, "grid.points")?)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        PotentialSpec::new(self.dimension, self.potential.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    /// Experiment parameters; absent keys take the defaults of `T`.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(Value::Object(self.params.clone()))
            .map_err(|e| Error::Config(format!("params of {}: {e}", self.experiment)))
    }

    /// SHA-256 of the canonical JSON form and the run seed.
    pub fn digest(&self, seed: u64) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canonical).expect("config serializes"));
        h.update(seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}

/// Seed for draw `s` of a run started with `run_seed`.
pub fn derive_seed(run_seed: u64, s: u64) -> u64 {
    run_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "experiment": "dispersive",
        "dimension": 2,
        "grid": {"extent": [8.0, 4.0], "points": 64},
        "potential": {"kind": "harmonic", "omega": [1.0, 1.0]},
        "time": {"T0": "auto", "dt": 0.01},
        "params": {"samples": 4},
        "output": {"dir": "out"}
    }"#;

    #[test]
    fn full_document_parses() {
        let cfg = ExperimentConfig::from_json(DOC).unwrap();
        let g = cfg.grid().unwrap();
        assert_eq!((g.extent(0), g.extent(1), g.points(1)), (8.0, 4.0, 64));
        assert_eq!(cfg.time.t0, T0Policy::Auto);
        assert_eq!(cfg.time.resolve(|| 0.25), 0.25);
        assert!(cfg.potential().unwrap().is_autonomous());
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn explicit_t0_and_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "x", "dimension": 1, "grid": {"extent": 4, "points": 32}, "time": {"T0": 0.5}}"#).unwrap();
        assert_eq!(cfg.time.t0, T0Policy::Fixed(0.5));
        assert!(cfg.potential().unwrap().is_free());
    }

    #[test]
    fn malformed_documents_are_rejected() {
        for doc in [
            r#"{"experiment": "x", "dimension": 1, "grid": {"extent": 4, "points": 30}}"#,
            r#"{"experiment": "x", "dimension": 2, "grid": {"extent": [4], "points": 32}}"#,
            r#"{"experiment": "x", "dimension": 1, "grid": {"extent": 4, "points": 32}, "time": {"T0": "soon"}}"#,
            r#"{"experiment": "x", "dimension": 1, "grid": {"extent": 4, "points": 32}, "extra": 1}"#,
            r#"{"experiment": "x", "dimension": 1, "grid": {"extent": 4, "points": 32}, "potential": {"kind": "harmonic", "omega": [1, 2]}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(doc), Err(Error::Config(_))), "{doc}");
        }
    }

    #[test]
    fn digest_ignores_the_output_directory() {
        let a = ExperimentConfig::from_json(DOC).unwrap();
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        assert_eq!(a.digest(3), b.digest(3));
        assert_ne!(a.digest(3), a.digest(4));
        assert_eq!(a.digest(3).len(), 64);
    }
}
