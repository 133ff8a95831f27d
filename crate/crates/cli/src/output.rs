//! CSV rendering, atomic writes and the run manifest.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifests.jsonl";

/// Twelve significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.11e}")
}

fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub comments: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, manifest_hash: &str) -> String {
        let mut s = format!("# manifest {manifest_hash}\n");
        for c in &self.comments {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Free text squeezed into one CSV cell.
pub fn cell_text(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(io(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Io {
            context: format!("renaming to {}", path.display()),
            source: e,
        }
    })
}

/// What went into a run. The hash covers everything except the timestamp
/// and output list, so identical inputs give identical CSV bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub hash: String,
    pub command: String,
    pub arguments: Vec<(String, String)>,
    pub config: String,
    pub taxis: String,
    pub version: String,
    pub timestamp: u64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, arguments: Vec<(String, String)>, config: String, taxis: String) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let mut h = Sha256::new();
        for part in [command, config.as_str(), taxis.as_str(), version.as_str()] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        for (k, v) in &arguments {
            h.update(format!("{k}={v}").as_bytes());
            h.update([0]);
        }
        let hash: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            hash: format!("sha256:{hash}"),
            command: command.to_string(),
            arguments,
            config,
            taxis,
            version,
            timestamp,
            outputs: Vec::new(),
        }
    }

    /// Writes every table under `out` and appends this manifest.
    pub fn emit(mut self, out: &Path, tables: &[(String, Table)]) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out).map_err(io(format!("creating {}", out.display())))?;
        let mut written = Vec::new();
        for (name, table) in tables {
            let path = out.join(name);
            write_atomic(&path, table.render(&self.hash).as_bytes())?;
            self.outputs.push(name.clone());
            written.push(path);
        }
        let line = serde_json::to_string(&self).map_err(|e| CliError::Solver(e.to_string()))?;
        let path = out.join(MANIFEST_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io(format!("opening {}", path.display())))?;
        writeln!(f, "{line}").map_err(io(format!("appending to {}", path.display())))?;
        Ok(written)
    }
}
