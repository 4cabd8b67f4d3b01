//! Declarative reward configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::align::AlignMode;
use crate::policy::MatchPolicy;
use crate::reward::{FormatMode, RewardWeights};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which reward components are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Recipe {
    Comet,
    CometBleu,
    CometAaw,
    CometAawAao,
    All,
}

impl Recipe {
    pub const ALL: [Recipe; 5] = [Self::Comet, Self::CometBleu, Self::CometAaw, Self::CometAawAao, Self::All];

    pub fn name(self) -> &'static str {
        match self {
            Self::Comet => "comet",
            Self::CometBleu => "comet+bleu",
            Self::CometAaw => "comet+aaw",
            Self::CometAawAao => "comet+aaw+aao",
            Self::All => "all",
        }
    }

    pub fn uses_aaw(self) -> bool {
        matches!(self, Self::CometAaw | Self::CometAawAao | Self::All)
    }

    pub fn uses_aao(self) -> bool {
        matches!(self, Self::CometAawAao | Self::All)
    }

    pub fn uses_taw(self) -> bool {
        self == Self::All
    }

    pub fn uses_bleu(self) -> bool {
        self == Self::CometBleu
    }

    pub fn needs_alignment(self) -> bool {
        self.uses_aaw() || self.uses_aao() || self.uses_taw()
    }

    /// Zeroes the weights of inactive components; the BLEU weight defaults to 1.
    pub fn effective_weights(self, w: &RewardWeights) -> RewardWeights {
        RewardWeights {
            alpha: if self.uses_aaw() { w.alpha } else { 0.0 },
            beta: if self.uses_aao() { w.beta } else { 0.0 },
            gamma: if self.uses_taw() { w.gamma } else { 0.0 },
            bleu_weight: self.uses_bleu().then(|| w.bleu_weight.unwrap_or(1.0)),
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| {
            let valid: Vec<_> = Self::ALL.iter().map(|r| r.name()).collect();
            format!("unknown recipe {s:?}; valid recipes: {}", valid.join(", "))
        })
    }
}

impl TryFrom<String> for Recipe {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Recipe> for String {
    fn from(r: Recipe) -> Self {
        r.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguagePair {
    pub src: String,
    pub tgt: String,
}

impl Default for LanguagePair {
    fn default() -> Self {
        Self {
            src: "zh".into(),
            tgt: "en".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum AlignmentSource {
    /// `align_ref` / `align_pre` Pharaoh strings on each record.
    Record,
    /// Built-in aligner with a trained table file.
    Table {
        path: PathBuf,
        #[serde(default)]
        mode: AlignMode,
    },
    /// Pharaoh files with one line per record, matched by record index.
    Sidecar { ref_path: PathBuf, pre_path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum KeySource {
    /// Every aligned source token is key.
    #[default]
    All,
    Lexicon {
        path: PathBuf,
        #[serde(default)]
        case_fold: bool,
        #[serde(default)]
        lang: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerBinding {
    Mock(f64),
    Precomputed,
    Endpoint(EndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    pub batch_size: usize,
    pub model: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScorerSection {
    binding: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_in_flight: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<String>,
}

impl TryFrom<ScorerSection> for ScorerBinding {
    type Error = String;

    fn try_from(s: ScorerSection) -> Result<Self, Self::Error> {
        let endpoint_only = s.url.is_some() || s.timeout_ms.is_some() || s.max_in_flight.is_some() || s.batch_size.is_some() || s.model.is_some();
        if let Some(constant) = s.binding.strip_prefix("mock:") {
            let v: f64 = constant
                .parse()
                .map_err(|_| format!("scorer.binding: bad mock constant {constant:?}"))?;
            if !v.is_finite() {
                return Err("scorer.binding: mock constant must be finite".into());
            }
            if endpoint_only {
                return Err("scorer: endpoint fields given for a mock binding".into());
            }
            return Ok(Self::Mock(v));
        }
        match s.binding.as_str() {
            "precomputed" if endpoint_only => Err("scorer: endpoint fields given for a precomputed binding".into()),
            "precomputed" => Ok(Self::Precomputed),
            "endpoint" => {
                let url = s.url.ok_or("scorer.url is required for the endpoint binding")?;
                let max_in_flight = s.max_in_flight.unwrap_or(4);
                let batch_size = s.batch_size.unwrap_or(32);
                if max_in_flight == 0 || batch_size == 0 {
                    return Err("scorer.max_in_flight and scorer.batch_size must be >= 1".into());
                }
                Ok(Self::Endpoint(EndpointConfig {
                    url,
                    timeout_ms: s.timeout_ms.unwrap_or(10_000),
                    max_in_flight,
                    batch_size,
                    model: s.model.unwrap_or_else(|| "default".into()),
                }))
            }
            other => Err(format!(
                "scorer.binding: unknown binding {other:?} (expected mock:<constant>, precomputed or endpoint)"
            )),
        }
    }
}

impl From<ScorerBinding> for ScorerSection {
    fn from(b: ScorerBinding) -> Self {
        let empty = |binding: String| ScorerSection {
            binding,
            url: None,
            timeout_ms: None,
            max_in_flight: None,
            batch_size: None,
            model: None,
        };
        match b {
            ScorerBinding::Mock(v) => empty(format!("mock:{v}")),
            ScorerBinding::Precomputed => empty("precomputed".into()),
            ScorerBinding::Endpoint(e) => ScorerSection {
                binding: "endpoint".into(),
                url: Some(e.url),
                timeout_ms: Some(e.timeout_ms),
                max_in_flight: Some(e.max_in_flight),
                batch_size: Some(e.batch_size),
                model: Some(e.model),
            },
        }
    }
}

impl Serialize for ScorerBinding {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ScorerSection::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ScorerBinding {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let section = ScorerSection::deserialize(deserializer)?;
        ScorerBinding::try_from(section).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    /// Records scored concurrently within one batch.
    pub parallelism: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self { parallelism: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub version: u32,
    pub recipe: Recipe,
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default)]
    pub matching: MatchPolicy,
    #[serde(default)]
    pub format: FormatMode,
    #[serde(default)]
    pub languages: LanguagePair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentSource>,
    #[serde(default)]
    pub keys: KeySource,
    pub scorer: ScorerBinding,
    #[serde(default)]
    pub service: ServiceSettings,
}

impl RewardConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        self.weights.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.recipe.needs_alignment() && self.alignment.is_none() {
            return Err(ConfigError::Invalid(format!(
                "recipe {} needs an [alignment] source (record, table or sidecar)",
                self.recipe
            )));
        }
        if self.service.parallelism == 0 {
            return Err(ConfigError::Invalid("service.parallelism must be >= 1".into()));
        }
        let e = self.matching.empty_order_reward;
        if !(0.0..=1.0).contains(&e) {
            return Err(ConfigError::Invalid(format!("matching.empty_order_reward must be in [0, 1], got {e}")));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config as written.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
