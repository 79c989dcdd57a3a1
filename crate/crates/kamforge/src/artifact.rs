//! Output files: a JSON envelope, CSV tables and SVG plots, all stamped with
//! the tool version and the config digest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Command;
use crate::error::{CliError, ErrorRecord, Result};
use crate::{TOOL, VERSION};

/// Stamp written into every artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub command: Option<Command>,
    pub digest: Option<String>,
}

impl Stamp {
    pub fn line(&self) -> String {
        format!("{TOOL} {VERSION} config={}", self.digest.as_deref().unwrap_or("none"))
    }

    pub fn envelope(&self, key: &str, body: Value) -> Value {
        json!({
            "tool": TOOL,
            "version": VERSION,
            "config_digest": self.digest,
            "command": self.command.map(|c| c.name()),
            key: body,
        })
    }
}

/// A named file produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

pub fn json_artifact(stamp: &Stamp, name: &str, result: Value) -> Artifact {
    let v = stamp.envelope("result", result);
    Artifact {
        name: name.to_string(),
        contents: format!("{}\n", serde_json::to_string_pretty(&v).expect("json value")),
    }
}

/// CSV with a `# tool version config=digest` first line.
pub fn csv_artifact<R: Serialize>(stamp: &Stamp, name: &str, header: &[String], rows: &[R]) -> Result<Artifact> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?).expect("utf-8 csv");
    Ok(Artifact {
        name: name.to_string(),
        contents: format!("# {}\n{body}", stamp.line()),
    })
}

pub fn svg_artifact(stamp: &Stamp, name: &str, plot: &crate::plot::Plot) -> Artifact {
    Artifact {
        name: name.to_string(),
        contents: plot.render(&stamp.line()),
    }
}

pub fn error_json(stamp: &Stamp, rec: &ErrorRecord) -> String {
    let v = stamp.envelope("error", serde_json::to_value(rec).expect("error record"));
    serde_json::to_string(&v).expect("json value")
}

pub fn write_all(dir: &Path, files: &[Artifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    files
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents).map_err(|source| CliError::Write { path: path.clone(), source })?;
            Ok(path)
        })
        .collect()
}
