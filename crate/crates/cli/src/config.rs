//! The JSON run configuration shared by `train` and `sweep`.

use std::path::{Path, PathBuf};

use dptab::data::{ColumnOrder, DEFAULT_BINS};
use dptab::privacy::AdamConfig;
use dptab::train::{Architecture, PrivacyMode, TrainRunConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub training: TrainingBlock,
    pub privacy: PrivacyBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingBlock {
    pub epochs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    pub batch: usize,
    pub lr: f64,
    #[serde(rename = "C")]
    pub clip: f64,
    pub adam_eps: f64,
    pub column_order: ColumnOrder,
    pub eval_interval: u64,
    pub val_frac: f64,
    /// Bins per numeric column.
    pub bins: usize,
    /// One token alphabet shared by all columns (requires identical category lists).
    pub share_tokens: bool,
}

impl Default for TrainingBlock {
    fn default() -> Self {
        let base = TrainRunConfig::default();
        Self {
            epochs: base.epochs,
            steps: None,
            batch: base.batch_size,
            lr: base.adam.lr,
            clip: base.clip_norm,
            adam_eps: base.adam.eps,
            column_order: base.column_order,
            eval_interval: base.eval_interval,
            val_frac: base.val_frac,
            bins: DEFAULT_BINS,
            share_tokens: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub non_private: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    1e-9
}

impl PrivacyBlock {
    pub fn mode(&self) -> Result<PrivacyMode, CliError> {
        match (self.epsilon, self.sigma, self.non_private) {
            (Some(e), None, false) => Ok(PrivacyMode::Epsilon(e)),
            (None, Some(s), false) => Ok(PrivacyMode::Sigma(s)),
            (None, None, true) => Ok(PrivacyMode::NonPrivate),
            _ => Err(CliError::usage(
                "invalid_config",
                "privacy block needs exactly one of epsilon, sigma, non_private: true",
                json!({ "privacy": self }),
            )),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            let code = if e.kind() == std::io::ErrorKind::NotFound { "config_not_found" } else { "io_error" };
            CliError::usage(code, e.to_string(), json!({ "path": path.display().to_string() }))
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::usage("invalid_config", e.to_string(), json!({ "path": path.display().to_string() }))
        })?;
        config.privacy.mode()?;
        Ok(config)
    }

    pub fn train_config(&self) -> Result<TrainRunConfig, CliError> {
        let t = &self.training;
        let config = TrainRunConfig {
            architecture: self.architecture,
            epochs: t.epochs,
            steps: t.steps,
            batch_size: t.batch,
            adam: AdamConfig { lr: t.lr, eps: t.adam_eps, ..AdamConfig::default() },
            clip_norm: t.clip,
            privacy: self.privacy.mode()?,
            delta: self.privacy.delta,
            eval_interval: t.eval_interval,
            column_order: t.column_order,
            val_frac: t.val_frac,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}
