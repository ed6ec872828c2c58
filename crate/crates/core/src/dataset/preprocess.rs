use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ColumnMeta, Dataset, RawDataset, RawValues};
use crate::error::{Error, Result};

/// How one raw column maps onto output columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    Numeric {
        source: String,
        min: f64,
        max: f64,
    },
    /// One 0/1 column per category seen on the fitting rows, each then
    /// min-max scaled like any other column.
    OneHot {
        source: String,
        categories: Vec<String>,
        outputs: Vec<String>,
        mins: Vec<f64>,
        maxs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessRecord {
    pub transforms: Vec<ColumnTransform>,
    pub target_min: f64,
    pub target_max: f64,
}

/// Constant columns (max == min) scale to 0.
fn scale(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        0.0
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Fits one-hot encoding and min-max scaling on `fit_rows` and applies them
/// to every row of `raw`.
pub fn preprocess(raw: &RawDataset, fit_rows: &[usize]) -> Result<(Dataset, PreprocessRecord)> {
    if fit_rows.is_empty() {
        return Err(Error::InvalidParameter("preprocess needs at least one fitting row".into()));
    }
    if let Some(&bad) = fit_rows.iter().find(|&&i| i >= raw.n()) {
        return Err(Error::InvalidParameter(format!("fit row {bad} out of range")));
    }

    let mut used_names: Vec<String> = Vec::new();
    let mut fresh_name = |base: String| {
        let mut name = base.clone();
        let mut k = 1;
        while used_names.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        used_names.push(name.clone());
        name
    };

    let mut transforms = Vec::with_capacity(raw.d());
    for column in &raw.columns {
        match &column.values {
            RawValues::Numeric(values) => {
                let (min, max) = min_max(fit_rows.iter().map(|&i| values[i]));
                fresh_name(column.meta.name.clone());
                transforms.push(ColumnTransform::Numeric {
                    source: column.meta.name.clone(),
                    min,
                    max,
                });
            }
            RawValues::Categorical(codes) => {
                let mut seen = vec![false; column.meta.categories.len()];
                for &i in fit_rows {
                    seen[codes[i]] = true;
                }
                let categories: Vec<String> = column
                    .meta
                    .categories
                    .iter()
                    .zip(&seen)
                    .filter(|(_, &s)| s)
                    .map(|(c, _)| c.clone())
                    .collect();
                let outputs = categories
                    .iter()
                    .map(|c| fresh_name(format!("{}={}", column.meta.name, c)))
                    .collect();
                let mut mins = Vec::with_capacity(categories.len());
                let mut maxs = Vec::with_capacity(categories.len());
                for label in &categories {
                    let (lo, hi) = min_max(
                        fit_rows
                            .iter()
                            .map(|&i| f64::from(u8::from(column.meta.categories[codes[i]] == *label))),
                    );
                    mins.push(lo);
                    maxs.push(hi);
                }
                transforms.push(ColumnTransform::OneHot {
                    source: column.meta.name.clone(),
                    categories,
                    outputs,
                    mins,
                    maxs,
                });
            }
        }
    }
    let (target_min, target_max) = min_max(fit_rows.iter().map(|&i| raw.target[i]));
    let record = PreprocessRecord {
        transforms,
        target_min,
        target_max,
    };
    let data = record.apply(raw)?;
    Ok((data, record))
}

impl PreprocessRecord {
    pub fn output_names(&self) -> Vec<String> {
        self.transforms
            .iter()
            .flat_map(|t| match t {
                ColumnTransform::Numeric { source, .. } => vec![source.clone()],
                ColumnTransform::OneHot { outputs, .. } => outputs.clone(),
            })
            .collect()
    }

    /// Source column name to the output columns it produced.
    pub fn one_hot_map(&self) -> Vec<(String, Vec<String>)> {
        self.transforms
            .iter()
            .filter_map(|t| match t {
                ColumnTransform::OneHot { source, outputs, .. } => Some((source.clone(), outputs.clone())),
                ColumnTransform::Numeric { .. } => None,
            })
            .collect()
    }

    /// Applies the fitted transforms to any raw dataset with the same
    /// source columns. Labels not seen during fitting encode as all zeros.
    pub fn apply(&self, raw: &RawDataset) -> Result<Dataset> {
        let names = self.output_names();
        let n = raw.n();
        let mut features = Array2::zeros((n, names.len()));
        let mut out_col = 0;
        for transform in &self.transforms {
            match transform {
                ColumnTransform::Numeric { source, min, max } => {
                    let column = raw
                        .columns
                        .iter()
                        .find(|c| &c.meta.name == source)
                        .ok_or_else(|| Error::UnknownFeature(source.clone()))?;
                    let RawValues::Numeric(values) = &column.values else {
                        return Err(Error::InvalidParameter(format!("column `{source}` is not numeric")));
                    };
                    for (i, &v) in values.iter().enumerate() {
                        features[[i, out_col]] = scale(v, *min, *max);
                    }
                    out_col += 1;
                }
                ColumnTransform::OneHot {
                    source,
                    categories,
                    mins,
                    maxs,
                    ..
                } => {
                    let column = raw
                        .columns
                        .iter()
                        .find(|c| &c.meta.name == source)
                        .ok_or_else(|| Error::UnknownFeature(source.clone()))?;
                    let lookup: HashMap<&str, usize> =
                        categories.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect();
                    for i in 0..n {
                        let hit = column.label(i).and_then(|label| lookup.get(label).copied());
                        for k in 0..categories.len() {
                            let indicator = if hit == Some(k) { 1.0 } else { 0.0 };
                            features[[i, out_col + k]] = scale(indicator, mins[k], maxs[k]);
                        }
                    }
                    out_col += categories.len();
                }
            }
        }
        let target = raw.target.iter().map(|&y| self.scale_target(y)).collect();
        let data = Dataset {
            features,
            target,
            columns: names.into_iter().map(ColumnMeta::numeric).collect(),
            target_name: raw.target_name.clone(),
        };
        if !data.is_finite() {
            return Err(Error::NonFinite("preprocessed dataset"));
        }
        Ok(data)
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        scale(y, self.target_min, self.target_max)
    }

    pub fn invert_target(&self, scaled: f64) -> f64 {
        if self.target_max > self.target_min {
            scaled * (self.target_max - self.target_min) + self.target_min
        } else {
            self.target_min
        }
    }
}
