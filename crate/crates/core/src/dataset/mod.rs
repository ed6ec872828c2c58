//! Tabular regression data: loading, min-max preprocessing, seeded
//! splits, perturbations and synthetic generators.
//!
//! A [`RawDataset`] keeps categorical columns as label codes. Running
//! [`preprocess`] turns it into a [`Dataset`]: every column numeric, one-hot
//! expanded, and min-max scaled with statistics taken from the fitting rows
//! only.

mod io;
mod preprocess;
mod split;
mod synth;

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

pub use io::{load_csv, read_csv, write_dataset_csv};
pub use preprocess::{preprocess, ColumnTransform, PreprocessRecord};
pub use split::{split, split_rows, SplitPlan};
pub use synth::{regression_function, synth_heteroscedastic, synth_house_prices, NoiseProfile, SyntheticData, HOUSE_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Distinct labels in first-appearance order; empty for numeric columns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnMeta {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValues {
    Numeric(Vec<f64>),
    /// Codes index into the column's `categories`.
    Categorical(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub meta: ColumnMeta,
    pub values: RawValues,
}

impl RawColumn {
    pub fn label(&self, row: usize) -> Option<&str> {
        match &self.values {
            RawValues::Categorical(codes) => Some(self.meta.categories[codes[row]].as_str()),
            RawValues::Numeric(_) => None,
        }
    }
}

/// Pre-encoding data as read from a file or produced by a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub columns: Vec<RawColumn>,
    pub target: Vec<f64>,
    pub target_name: String,
}

impl RawDataset {
    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    /// Wraps an all-numeric matrix.
    pub fn from_numeric(features: &Array2<f64>, names: &[String], target: Vec<f64>, target_name: &str) -> Self {
        let columns = names
            .iter()
            .enumerate()
            .map(|(j, name)| RawColumn {
                meta: ColumnMeta::numeric(name.clone()),
                values: RawValues::Numeric(features.column(j).to_vec()),
            })
            .collect();
        Self {
            columns,
            target,
            target_name: target_name.to_string(),
        }
    }
}

/// Numeric feature matrix plus target. Rows are observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub target: Vec<f64>,
    pub columns: Vec<ColumnMeta>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(features: Array2<f64>, target: Vec<f64>, names: Vec<String>, target_name: &str) -> Result<Self> {
        if features.nrows() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: target.len(),
            });
        }
        if features.ncols() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                found: names.len(),
            });
        }
        Ok(Self {
            features,
            target,
            columns: names.into_iter().map(ColumnMeta::numeric).collect(),
            target_name: target_name.to_string(),
        })
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            target: rows.iter().map(|&i| self.target[i]).collect(),
            columns: self.columns.clone(),
            target_name: self.target_name.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.features.iter().all(|v| v.is_finite()) && self.target.iter().all(|v| v.is_finite())
    }
}

fn unique_name(existing: &[ColumnMeta], base: &str) -> String {
    let taken = |name: &str| existing.iter().any(|c| c.name == name);
    if !taken(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|candidate| !taken(candidate))
        .expect("unbounded suffix search")
}

/// Appends an i.i.d. Uniform[0,1] column named `X_Random`, drawn
/// independently of everything else.
pub fn add_random_feature(data: &Dataset, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(derive_seed(seed, stream::RANDOM_FEATURE));
    let n = data.n();
    let d = data.d();
    let mut features = Array2::zeros((n, d + 1));
    features.slice_mut(ndarray::s![.., ..d]).assign(&data.features);
    for i in 0..n {
        features[[i, d]] = rng.random::<f64>();
    }
    let mut columns = data.columns.clone();
    columns.push(ColumnMeta::numeric(unique_name(&data.columns, "X_Random")));
    Dataset {
        features,
        target: data.target.clone(),
        columns,
        target_name: data.target_name.clone(),
    }
}

/// Adds independent `N(noise_mean, noise_sd²)` draws to the named columns.
/// Draws are taken row by row, in the order the names are listed.
pub fn perturb(data: &Dataset, feature_names: &[String], noise_mean: f64, noise_sd: f64, seed: u64) -> Result<Dataset> {
    let indices = feature_names
        .iter()
        .map(|name| data.column_index(name).ok_or_else(|| Error::UnknownFeature(name.clone())))
        .collect::<Result<Vec<_>>>()?;
    perturb_columns(data, &indices, noise_mean, noise_sd, seed)
}

pub fn perturb_columns(data: &Dataset, columns: &[usize], noise_mean: f64, noise_sd: f64, seed: u64) -> Result<Dataset> {
    perturb_columns_scaled(data, columns, noise_mean, noise_sd, None, seed)
}

/// Like [`perturb_columns`], with each draw for `columns[k]` multiplied by
/// `scales[k]`; used to express a shift given in raw units on
/// normalized features.
pub fn perturb_columns_scaled(
    data: &Dataset,
    columns: &[usize],
    noise_mean: f64,
    noise_sd: f64,
    scales: Option<&[f64]>,
    seed: u64,
) -> Result<Dataset> {
    if let Some(&bad) = columns.iter().find(|&&j| j >= data.d()) {
        return Err(Error::UnknownFeature(format!("column #{bad}")));
    }
    if let Some(scales) = scales {
        if scales.len() != columns.len() {
            return Err(Error::DimensionMismatch { expected: columns.len(), found: scales.len() });
        }
    }
    let normal = Normal::new(noise_mean, noise_sd)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut out = data.clone();
    if columns.is_empty() {
        return Ok(out);
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::PERTURB));
    for i in 0..out.n() {
        for (k, &j) in columns.iter().enumerate() {
            let draw = normal.sample(&mut rng);
            out.features[[i, j]] += scales.map_or(draw, |s| s[k] * draw);
        }
    }
    Ok(out)
}
