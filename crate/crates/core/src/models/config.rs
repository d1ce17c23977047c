use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::portgraph::ElementId;
use crate::rewrite::MatchMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ic,
    Lt,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ic => "IC",
            ModelKind::Lt => "LT",
        }
    }
}

impl FromStr for ModelKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Ok(ModelKind::Ic),
            "lt" => Ok(ModelKind::Lt),
            _ => Err(ConfigError::UnknownModel(s.to_owned())),
        }
    }
}

/// How initial probabilities or thresholds are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    Const(f64),
    Uniform { lo: f64, hi: f64 },
    /// Per-element values read from a text file: `<element-id> <value>...` per line.
    File(PathBuf),
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown model `{0}` (expected ic or lt)")]
    UnknownModel(String),
    #[error("bad distribution `{0}` (expected const:x, uniform:lo,hi or file:path)")]
    BadDistribution(String),
    #[error("distribution `{0}` leaves [0, 1]")]
    OutOfRange(String),
    #[error("theta required for LT")]
    ThetaRequired,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl Distribution {
    pub fn check_unit(&self) -> Result<(), ConfigError> {
        let ok = match *self {
            Distribution::Const(x) => (0.0..=1.0).contains(&x),
            Distribution::Uniform { lo, hi } => 0.0 <= lo && lo <= hi && hi <= 1.0,
            Distribution::File(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::OutOfRange(self.to_string()))
        }
    }

    /// One draw; file distributions are resolved by the caller.
    pub fn sample(&self, rng: &mut impl Rng) -> Option<f64> {
        match *self {
            Distribution::Const(x) => Some(x),
            Distribution::Uniform { lo, hi } if lo == hi => Some(lo),
            Distribution::Uniform { lo, hi } => Some(rng.gen_range(lo..=hi)),
            Distribution::File(_) => None,
        }
    }

    /// Reads `<element-id> <value>...` lines; blank lines and `#` comments are skipped.
    pub fn load_table(path: &Path) -> Result<BTreeMap<ElementId, Vec<f64>>, ConfigError> {
        let err = |message: String| ConfigError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut out = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let id = cols
                .next()
                .and_then(|c| c.parse::<u64>().ok())
                .ok_or_else(|| err(format!("line {}: expected an element id", n + 1)))?;
            let values = cols
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(format!("line {}: {e}", n + 1)))?;
            if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(err(format!("line {}: value outside [0, 1]", n + 1)));
            }
            out.insert(ElementId(id), values);
        }
        Ok(out)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Const(x) => write!(f, "const:{x}"),
            Distribution::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Distribution::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for Distribution {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::BadDistribution(s.to_owned());
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        let d = match kind.trim() {
            "const" => Distribution::Const(num(arg)?),
            "uniform" => {
                let (lo, hi) = arg.split_once(',').ok_or_else(bad)?;
                Distribution::Uniform {
                    lo: num(lo)?,
                    hi: num(hi)?,
                }
            }
            "file" if !arg.is_empty() => Distribution::File(PathBuf::from(arg)),
            _ => return Err(bad()),
        };
        d.check_unit()?;
        Ok(d)
    }
}

impl Serialize for Distribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything needed to set up and run one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    /// Seed nodes, by `name` property or numeric element id.
    pub seeds: Vec<String>,
    /// `None` keeps the probabilities already stored on the edges.
    pub probability: Option<Distribution>,
    pub theta: Option<Distribution>,
    pub rng_seed: u64,
    pub max_rounds: usize,
    pub strict_sigma: bool,
    pub mode: MatchMode,
}

impl ModelConfig {
    pub fn new(model: ModelKind, seeds: Vec<String>) -> Self {
        ModelConfig {
            model,
            seeds,
            probability: None,
            theta: None,
            rng_seed: 0,
            max_rounds: 100,
            strict_sigma: false,
            mode: MatchMode::Random,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::NoSeeds);
        }
        if self.model == ModelKind::Lt && self.theta.is_none() {
            return Err(ConfigError::ThetaRequired);
        }
        for d in self.probability.iter().chain(&self.theta) {
            d.check_unit()?;
        }
        Ok(())
    }
}

/// On-disk layout: `[model]`, `[init]` and `[rng]` sections, every key optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub rng: RngSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelKind>,
    pub max_rounds: Option<usize>,
    pub strict_sigma: Option<bool>,
    pub mode: Option<MatchMode>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub seeds: Option<Vec<String>>,
    pub p: Option<Distribution>,
    pub theta: Option<Distribution>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    pub seed: Option<u64>,
}

impl ConfigFile {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::File {
            path: "<config>".into(),
            message,
        };
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| err(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| err(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::File { message, .. } => ConfigError::File {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Fills unset fields of `base` from this file; set fields of `base` win.
    pub fn overlay(&self, base: &mut PartialConfig) {
        base.model = base.model.or(self.model.kind);
        base.max_rounds = base.max_rounds.or(self.model.max_rounds);
        base.strict_sigma = base.strict_sigma.or(self.model.strict_sigma);
        base.mode = base.mode.or(self.model.mode);
        if base.seeds.is_none() {
            base.seeds.clone_from(&self.init.seeds);
        }
        if base.probability.is_none() {
            base.probability.clone_from(&self.init.p);
        }
        if base.theta.is_none() {
            base.theta.clone_from(&self.init.theta);
        }
        base.rng_seed = base.rng_seed.or(self.rng.seed);
    }
}

/// Configuration assembled from flags and files before defaults apply.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialConfig {
    pub model: Option<ModelKind>,
    pub seeds: Option<Vec<String>>,
    pub probability: Option<Distribution>,
    pub theta: Option<Distribution>,
    pub rng_seed: Option<u64>,
    pub max_rounds: Option<usize>,
    pub strict_sigma: Option<bool>,
    pub mode: Option<MatchMode>,
}

impl PartialConfig {
    pub fn finish(self) -> Result<ModelConfig, ConfigError> {
        let model = self.model.ok_or_else(|| ConfigError::UnknownModel("<unset>".into()))?;
        let mut cfg = ModelConfig::new(model, self.seeds.unwrap_or_default());
        cfg.probability = self.probability;
        cfg.theta = self.theta;
        cfg.rng_seed = self.rng_seed.unwrap_or(0);
        cfg.max_rounds = self.max_rounds.unwrap_or(cfg.max_rounds);
        cfg.strict_sigma = self.strict_sigma.unwrap_or(false);
        cfg.mode = self.mode.unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }
}
