//! CSV to preprocessed CSV: one-hot encoding and min-max scaling.

use std::collections::HashMap;
use std::path::Path;

use selreg::dataset::{load_csv, preprocess, write_dataset_csv, ColumnKind};

use crate::error::CliResult;
use crate::output;

pub const DATA_FILE: &str = "dataset.csv";
pub const RECORD_FILE: &str = "preprocess.json";

/// Fits the transforms on every row of `input` and writes the scaled data
/// and the fitted record into `out`.
pub fn run_prep(input: &Path, target: &str, categorical: &[String], out: &Path) -> CliResult<usize> {
    let kinds: HashMap<String, ColumnKind> = categorical.iter().map(|c| (c.clone(), ColumnKind::Categorical)).collect();
    let raw = load_csv(input, target, (!kinds.is_empty()).then_some(&kinds))?;
    let rows: Vec<usize> = (0..raw.n()).collect();
    let (data, record) = preprocess(&raw, &rows)?;
    output::create_dir(out)?;
    let path = out.join(DATA_FILE);
    write_dataset_csv(&data, output::create(&path)?)?;
    output::write_json(&out.join(RECORD_FILE), &record)?;
    Ok(data.n())
}
