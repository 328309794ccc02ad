//! The run configuration: defaults, overridden by a TOML file, overridden
//! by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use metaphor_forge_core::eval::ratings::{CorrelationConfig, FilterConfig};
use metaphor_forge_core::eval::MetricConfig;
use metaphor_forge_core::lexrep::LexRepConfig;
use metaphor_forge_core::masking::MaskingConfig;
use metaphor_forge_core::nn::train::{FitConfig, Schedule};
use metaphor_forge_core::nn::TransformerConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resources::EmbeddingFormat;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    pub wordnet_index: Option<PathBuf>,
    pub wordnet_data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embeddings_format: EmbeddingFormat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    #[serde(flatten)]
    pub fit: FitConfig,
    pub schedule: Schedule,
    /// Share of the pairs held out for early stopping.
    pub heldout_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub ratings_per_item: usize,
    pub test_every: u64,
    pub lease_seconds: u64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            ratings_per_item: 5,
            test_every: 10,
            lease_seconds: 600,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub filter: FilterConfig,
    pub correlation: CorrelationConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds model initialization, dropout, shuffling and permutation tests.
    pub seed: u64,
    pub checkpoint: Option<PathBuf>,
    pub resources: ResourcePaths,
    pub lexrep: LexRepConfig,
    pub masking: MaskingConfig,
    pub transformer: TransformerConfig,
    pub training: TrainingConfig,
    pub metric: MetricConfig,
    pub eval: EvalConfig,
    pub serve: ServeConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unprintable configuration: {e}\n"))
    }

    /// Pushes the single seed into every seeded component.
    pub fn propagate_seed(&mut self) {
        self.transformer.seed = self.seed;
        self.eval.correlation.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.lexrep
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("lexrep: {e}")))?;
        if self.masking.vocab_cap == 0 {
            return Err(ConfigError::Invalid("masking: vocab_cap must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.training.heldout_fraction) {
            return Err(ConfigError::Invalid(
                "training: heldout_fraction must be in [0, 1)".into(),
            ));
        }
        if !self.metric.lambda.is_finite() {
            return Err(ConfigError::Invalid("metric: lambda must be finite".into()));
        }
        Ok(())
    }
}
