//! File emission shared by the subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn finish(mut writer: BufWriter<File>, path: &Path) -> CliResult<()> {
    writer.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes serializable rows as CSV with a header derived from the type.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    for row in rows {
        wtr.serialize(row)?;
    }
    let inner = wtr.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    finish(inner, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Bench,
    Audit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Ok,
    /// Some methods failed; the others produced records.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    /// `None` when the whole cell failed before any method ran.
    pub method: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStatus {
    pub dataset: String,
    pub seed: u64,
    pub state: CellState,
    pub failures: Vec<Failure>,
}

impl CellStatus {
    pub fn new(dataset: &str, seed: u64, failures: Vec<Failure>, n_succeeded: usize) -> Self {
        let state = if failures.is_empty() {
            CellState::Ok
        } else if n_succeeded > 0 {
            CellState::Partial
        } else {
            CellState::Failed
        };
        Self {
            dataset: dataset.to_string(),
            seed,
            state,
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellStatus>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: Command, config: &ExperimentConfig, cells: Vec<CellStatus>, outputs: Vec<String>) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            config: config.canonical(),
            seeds: config.seeds.clone(),
            cells,
            outputs,
        }
    }

    pub fn n_failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.state != CellState::Ok).count()
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path: PathBuf = dir.join(MANIFEST_FILE);
        let bad = |reason: String| CliError::Manifest {
            path: dir.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(&path).map_err(|e| bad(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    }
}
