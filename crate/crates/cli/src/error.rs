use std::path::Path;

use dptab::data::DataError;
use dptab::metrics::MetricsError;
use dptab::model::ModelError;
use dptab::privacy::PrivacyError;
use dptab::train::TrainError;
use serde_json::{json, Value};

/// Exit status for runtime failures.
pub const EXIT_RUNTIME: i32 = 1;
/// Exit status for usage, input validation and file errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub context: Value,
    pub exit: i32,
}

impl CliError {
    pub fn usage(code: &'static str, message: impl Into<String>, context: Value) -> Self {
        Self { code, message: message.into(), context, exit: EXIT_USAGE }
    }

    pub fn runtime(code: &'static str, message: impl Into<String>, context: Value) -> Self {
        Self { code, message: message.into(), context, exit: EXIT_RUNTIME }
    }

    pub fn to_json(&self) -> String {
        json!({ "code": self.code, "message": self.message, "context": self.context }).to_string()
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::usage("io_error", err.to_string(), json!({ "path": path.display().to_string() }))
    }

    /// Maps a failure to read or validate an input file.
    pub fn input(kind: &'static str, path: &Path, err: DataError) -> Self {
        let ctx = json!({ "path": path.display().to_string() });
        let code = match (&err, kind) {
            (DataError::Io { source, .. }, "schema") if source.kind() == std::io::ErrorKind::NotFound => {
                "schema_not_found"
            }
            (DataError::Io { source, .. }, _) if source.kind() == std::io::ErrorKind::NotFound => {
                "data_not_found"
            }
            (DataError::Io { .. }, _) => "io_error",
            (DataError::InvalidSchema(_), _) => "invalid_schema",
            _ => "invalid_data",
        };
        Self::usage(code, err.to_string(), ctx)
    }

    pub fn checkpoint(path: &Path, err: ModelError) -> Self {
        let ctx = json!({ "path": path.display().to_string() });
        match err {
            ModelError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Self::usage("model_not_found", e.to_string(), ctx)
            }
            ModelError::SchemaHashMismatch => {
                Self::usage("schema_hash_mismatch", err.to_string(), ctx)
            }
            other => Self::usage("checkpoint_invalid", other.to_string(), ctx),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(err: TrainError) -> Self {
        match err {
            TrainError::InvalidConfig(m) => Self::usage("invalid_config", m, Value::Null),
            TrainError::Privacy(p) => p.into(),
            TrainError::Data(d) => Self::usage("invalid_data", d.to_string(), Value::Null),
            other => Self::runtime("training_failed", other.to_string(), Value::Null),
        }
    }
}

impl From<PrivacyError> for CliError {
    fn from(err: PrivacyError) -> Self {
        match err {
            PrivacyError::Infeasible { target, sigma_max } => Self::runtime(
                "infeasible_calibration",
                err.to_string(),
                json!({ "target_epsilon": target, "sigma_max": sigma_max }),
            ),
            PrivacyError::InvalidParameter(m) => Self::usage("invalid_parameter", m, Value::Null),
            other => Self::runtime("privacy_failed", other.to_string(), Value::Null),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(err: MetricsError) -> Self {
        let msg = err.to_string();
        match err {
            MetricsError::TargetMissing(t) => Self::usage("target_missing", msg, json!({ "target": t })),
            MetricsError::TargetNotNumeric(t) => {
                Self::usage("target_not_numeric", msg, json!({ "target": t }))
            }
            MetricsError::TargetNotCategorical(t) => {
                Self::usage("target_not_categorical", msg, json!({ "target": t }))
            }
            _ => Self::runtime("metrics_failed", msg, Value::Null),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(err: ModelError) -> Self {
        Self::runtime("model_failed", err.to_string(), Value::Null)
    }
}
