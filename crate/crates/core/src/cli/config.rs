//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::augment::AugmentConfig;
use crate::preprocess::PreprocessConfig;
use crate::verify::MetricKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderChoice {
    Baseline,
    External { path: PathBuf },
}

fn default_runs() -> usize {
    1
}

fn default_metric() -> String {
    MetricKind::Cosine.name().to_string()
}

/// ```json
/// {
///   "preprocess": {"normalization": "non_normalized", "segmented": true},
///   "augment": {"range_deg": 60, "apertures": 6},
///   "embedder": {"kind": "baseline"},
///   "metric": "cosine",
///   "runs": 30,
///   "seed": 7
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub augment: Option<AugmentConfig>,
    #[serde(default = "ExperimentConfig::default_embedder")]
    pub embedder: EmbedderChoice,
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to every embedding value,
    /// seeded per run with `seed + run_index`. Zero disables it.
    #[serde(default)]
    pub embedding_noise: f64,
    #[serde(default)]
    pub l2_normalize: bool,
}

impl ExperimentConfig {
    fn default_embedder() -> EmbedderChoice {
        EmbedderChoice::Baseline
    }

    pub fn new(preprocess: PreprocessConfig) -> Self {
        Self {
            preprocess,
            augment: None,
            embedder: EmbedderChoice::Baseline,
            metric: default_metric(),
            runs: 1,
            seed: 0,
            embedding_noise: 0.0,
            l2_normalize: false,
        }
    }

    /// Loads and validates; relative external-embedding paths resolve
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let EmbedderChoice::External { path: p } = &mut cfg.embedder {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.preprocess
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(a) = &self.augment {
            a.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.runs == 0 {
            return Err(CliError::Config("runs must be at least 1".into()));
        }
        if !(self.embedding_noise >= 0.0 && self.embedding_noise.is_finite()) {
            return Err(CliError::Config("embedding_noise must be a finite non-negative number".into()));
        }
        self.metric_kind()?;
        if let EmbedderChoice::External { path } = &self.embedder {
            if !path.is_file() {
                return Err(CliError::Config(format!(
                    "external embedding file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn metric_kind(&self) -> Result<MetricKind, CliError> {
        self.metric
            .parse()
            .map_err(|e: crate::verify::VerifyError| CliError::Config(e.to_string()))
    }
}
