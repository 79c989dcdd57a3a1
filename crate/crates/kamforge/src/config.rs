//! Experiment configs.
//!
//! ```json
//! {
//!   "command": "dioph",
//!   "seed": 0,
//!   "format": "json",
//!   "tolerances": { "rank_tol": 1e-9, "check": 1e-10 },
//!   "params": { "omega": [1.0, 1.618], "gamma": 0.1, "tau": 1.5, "k_max": 50 }
//! }
//! ```
//!
//! `params` depends on the command. Wherever a params field names another
//! file (field definitions, unfoldings), a string is read as a path relative
//! to the config file and an object is taken inline.

use std::fmt;
use std::path::{Path, PathBuf};

use kamforge_core::Tolerances;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{config_err, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Unfold,
    Nondegen,
    Dioph,
    Measure,
    Cover,
    Homsolve,
    Kamstep,
    Response,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Unfold => "unfold",
            Command::Nondegen => "nondegen",
            Command::Dioph => "dioph",
            Command::Measure => "measure",
            Command::Cover => "cover",
            Command::Homsolve => "homsolve",
            Command::Kamstep => "kamstep",
            Command::Response => "response",
            Command::Sweep => "sweep",
        }
    }

    pub const ALL: [Command; 9] = [
        Command::Unfold,
        Command::Nondegen,
        Command::Dioph,
        Command::Measure,
        Command::Cover,
        Command::Homsolve,
        Command::Kamstep,
        Command::Response,
        Command::Sweep,
    ];
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Numerical thresholds; unset fields keep the library defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub membership_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguity_window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond_max: Option<f64>,
    /// Pass/fail threshold for residuals, symmetry defects and Newton solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<f64>,
}

pub const DEFAULT_CHECK: f64 = 1e-10;

impl ToleranceConfig {
    pub fn library(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            rank_tol: self.rank_tol.unwrap_or(d.rank_tol),
            cluster_tol: self.cluster_tol.unwrap_or(d.cluster_tol),
            membership_tol: self.membership_tol.unwrap_or(d.membership_tol),
            ambiguity_window: self.ambiguity_window.unwrap_or(d.ambiguity_window),
            merge_cap: self.merge_cap.unwrap_or(d.merge_cap),
            cond_max: self.cond_max.unwrap_or(d.cond_max),
        }
    }

    pub fn check(&self) -> f64 {
        self.check.unwrap_or(DEFAULT_CHECK)
    }

    fn validate(&self) -> Result<()> {
        let all = [
            ("rank_tol", self.rank_tol),
            ("cluster_tol", self.cluster_tol),
            ("membership_tol", self.membership_tol),
            ("ambiguity_window", self.ambiguity_window),
            ("merge_cap", self.merge_cap),
            ("cond_max", self.cond_max),
            ("check", self.check),
        ];
        for (name, v) in all {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(config_err(format!("tolerance {name} must be positive and finite")));
                }
            }
        }
        if let Some(w) = self.ambiguity_window {
            if w < 1.0 {
                return Err(config_err("ambiguity_window must be >= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub params: Value,
    /// Directory that relative input paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that replace the config's.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.tol {
            self.tolerances.check = Some(t);
        }
        if let Some(f) = o.format {
            self.format = f;
        }
    }

    /// Inlines every file referenced from `params` and checks the tolerances.
    pub fn resolve(mut self) -> Result<Self> {
        self.tolerances.validate()?;
        let keys = ["field", "unfolding"];
        if let Value::Object(map) = &mut self.params {
            for key in keys {
                if let Some(v) = map.get_mut(key) {
                    if let Value::String(rel) = v {
                        *v = read_json(&self.base_dir.join(rel.as_str()))?;
                    }
                }
            }
        } else if !self.params.is_null() {
            return Err(config_err("params must be an object"));
        }
        Ok(self)
    }

    /// Hex SHA-256 of the canonical JSON of the resolved config.
    pub fn digest(&self) -> String {
        // serde_json maps are ordered by key, so this is canonical
        let v = serde_json::to_value(self).expect("config is serializable");
        let bytes = serde_json::to_vec(&v).expect("value is serializable");
        let d = Sha256::digest(&bytes);
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        let v = if self.params.is_null() {
            Value::Object(Default::default())
        } else {
            self.params.clone()
        };
        serde_json::from_value(v).map_err(|e| config_err(format!("params for {}: {e}", self.command)))
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}
