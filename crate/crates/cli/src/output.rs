//! Tables, the run manifest and writing them to disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RawConfig, ScenarioKind};
use crate::error::{CliError, CliResult};

/// One observable: a header of unit-suffixed column names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub observable: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(observable: &'static str, columns: &[&'static str]) -> Self {
        Self {
            observable,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self, kind: ScenarioKind) -> String {
        format!("{kind}__{}.csv", self.observable)
    }

    /// Comma-separated text with a header row. Numbers use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v}").expect("writing to a string");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub kind: ScenarioKind,
    pub tables: Vec<Table>,
}

impl Bundle {
    pub fn table(&self, observable: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.observable == observable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub code_version: String,
    pub threads: usize,
    pub wall_clock_seconds: f64,
}

/// Everything needed to repeat a run: the resolved configuration in
/// canonical units plus provenance and output checksums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub run: RunInfo,
    /// `sha256:<hex>` per output file.
    #[serde(default)]
    pub checksums: BTreeMap<String, String>,
    pub config: RawConfig,
}

impl Manifest {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<manifest>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().message().trim().to_string())
        })
    }
}

pub const MANIFEST_FILE: &str = "manifest";

fn sha256_hex(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Write every table and then the manifest into `dir`; returns the paths
/// written, manifest last.
pub fn write_bundle(bundle: &Bundle, config: RawConfig, run: RunInfo, dir: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    let mut checksums = BTreeMap::new();
    for table in &bundle.tables {
        let name = table.file_name(bundle.kind);
        let path = dir.join(&name);
        let csv = table.to_csv();
        fs::write(&path, &csv).map_err(|e| CliError::io(&path, e))?;
        checksums.insert(name, sha256_hex(csv.as_bytes()));
        written.push(path);
    }
    let manifest = Manifest { run, checksums, config };
    let text = toml::to_string(&manifest).expect("manifest serialises");
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
