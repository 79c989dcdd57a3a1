use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] kamforge_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Machine-readable form of an error.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl CliError {
    /// 2 for unusable input, 1 for a failed computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) => 1,
            _ => 2,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        use kamforge_core::Error as E;
        let (kind, details) = match self {
            CliError::Read { path, .. } => ("read", json!({ "path": path })),
            CliError::Write { path, .. } => ("write", json!({ "path": path })),
            CliError::Usage(_) => ("usage", Value::Null),
            CliError::Config(_) => ("config", Value::Null),
            CliError::Core(e) => match e {
                E::DimensionMismatch(_) => ("dimension_mismatch", Value::Null),
                E::InvalidInput(_) => ("invalid_input", Value::Null),
                E::RankAmbiguous { ratio, tol } => ("rank_ambiguous", json!({ "ratio": ratio, "tol": tol })),
                E::IllConditioned(_) => ("ill_conditioned", Value::Null),
                E::SplittingFailed { rank, expected } => ("splitting_failed", json!({ "rank": rank, "expected": expected })),
                E::SmallDivisor { k, divisor, bound } => ("small_divisor", json!({ "k": k, "divisor": divisor, "bound": bound })),
                E::Unsolvable { component, defect, witness } => {
                    ("unsolvable", json!({ "component": component, "defect": defect, "witness": witness }))
                }
                E::NoConvergence { iterations, residual } => {
                    ("no_convergence", json!({ "iterations": iterations, "residual": residual }))
                }
                E::Overflow => ("overflow", Value::Null),
            },
        };
        ErrorRecord {
            kind,
            message: self.to_string(),
            details,
        }
    }
}
