//! CSV tables with `#` comment headers and JSON run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rotorlab_core::SimulationParams;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Table with a self-describing comment header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        for c in &self.comments {
            writeln!(out, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
    }
}

/// Shortest representation that parses back to the same `f64`; exponent
/// form outside `[1e-5, 1e16)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub kick_over_hbar: f64,
    pub mean_free_path: f64,
    pub predicted_localization_length: f64,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub command: String,
    pub arguments: Vec<String>,
    pub seed: u64,
    pub params: SimulationParams,
    pub derived: Derived,
    pub options: serde_json::Value,
    pub results: serde_json::Value,
    pub files: Vec<FileEntry>,
}

/// Collects tables for one command and writes them with a manifest.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let bytes = table.to_bytes()?;
        let path = self.dir.join(name);
        fs::write(&path, &bytes)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(path)
    }

    pub fn finish(
        self,
        command: &str,
        params: &SimulationParams,
        options: serde_json::Value,
        results: serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            command: command.to_string(),
            arguments: std::env::args().collect(),
            seed: params.seed,
            params: params.clone(),
            derived: Derived {
                kick_over_hbar: params.kick_over_hbar(),
                mean_free_path: params.mean_free_path(),
                predicted_localization_length: params.predicted_localization_length(),
            },
            options,
            results,
            files: self.files,
        };
        let path = self.dir.join(format!("{command}_manifest.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}
