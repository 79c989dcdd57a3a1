//! Batch driver for `kamforge-core`.
//!
//! A run reads one experiment config (JSON), executes a single command and
//! writes its artifacts into an output directory. Every artifact carries the
//! tool version and the SHA-256 digest of the effective config, which is the
//! config after command-line overrides with all referenced files inlined.

pub mod artifact;
pub mod config;
pub mod error;
pub mod field;
pub mod plot;
pub mod run;

pub use config::{Command, ExperimentConfig, Format, Overrides};
pub use error::{CliError, Result};
pub use run::{run, RunOutput};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TOOL: &str = "kamforge";
