//! Result emission (JSON and CSV) and the reproducibility manifest.

use dftfunclab::{LabError, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Seed recorded for every run; all randomized corpora derive from it.
pub const SEED: u64 = dftfunclab::verify::SEED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(LabError::Input(format!("unknown format `{s}`"))),
        }
    }
}

/// One inequality or tolerance test attached to a result.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Assertion {
    /// Passes when `slack ≥ -tolerance`.
    pub fn slack(name: &str, slack: f64, tolerance: f64) -> Self {
        Assertion { name: name.into(), value: slack, tolerance, passed: slack >= -tolerance }
    }

    /// Passes when `value ≤ limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Assertion { name: name.into(), value, tolerance: limit, passed: value <= limit }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Default)]
pub struct Emission {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Value,
    pub tolerances: BTreeMap<String, f64>,
    pub iterations: Option<usize>,
    pub gap: Option<f64>,
    pub assertions: Vec<Assertion>,
    pub table: Option<Table>,
    /// Extra files requested by the command, written next to the primary output.
    pub side_files: Vec<(PathBuf, String)>,
}

impl Emission {
    pub fn new(command: &str, inputs: BTreeMap<String, String>, outputs: Value) -> Self {
        Emission { command: command.into(), inputs, outputs, ..Default::default() }
    }

    pub fn failed(&self) -> bool {
        self.assertions.iter().any(|a| !a.passed)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => {
                let doc = serde_json::json!({
                    "command": self.command,
                    "inputs": self.inputs,
                    "outputs": self.outputs,
                    "meta": {
                        "tolerances": self.tolerances,
                        "iterations": self.iterations,
                        "gap": self.gap,
                        "seed": SEED,
                        "assertions": self.assertions,
                    },
                });
                let mut text = serde_json::to_string_pretty(&doc).map_err(|e| LabError::Input(e.to_string()))?;
                text.push('\n');
                Ok(text)
            }
            Format::Csv => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| LabError::Input(format!("`{}` has no tabular output; use --format json", self.command)))?;
                Ok(render_csv(table))
            }
        }
    }
}

pub fn render_csv(table: &Table) -> String {
    let mut out = format!("# {}\n", table.columns.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Argument vector that reproduces the run without the config file.
    pub args: Vec<String>,
    pub parameters: BTreeMap<String, String>,
    pub input_digests: BTreeMap<String, String>,
    pub output_digests: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub tolerance_outcomes: Vec<Assertion>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LabError::Input(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| LabError::Input(e.to_string()))?;
        write_file(path, &(text + "\n"))
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LabError::Input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_comment_and_full_precision() {
        let t = Table { columns: vec!["L".into(), "value".into()], rows: vec![vec![4.0, 0.1]] };
        let text = render_csv(&t);
        assert!(text.starts_with("# L,value\n"));
        let v: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.1);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
