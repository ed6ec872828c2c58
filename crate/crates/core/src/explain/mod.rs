//! Explaining accept/reject decisions: an audit classifier imitates the
//! selection rule, its output is attributed to features with Shapley
//! values, and a shift study measures how far those attributions move when
//! a feature drifts.

mod shapley;
mod wasserstein;

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::{perturb_columns_scaled, Dataset};
use crate::error::{Error, Result};
use crate::learners::{fit, FittedModel, LearnerSpec, ModelParams};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::selective::SelectiveModel;
use crate::stats;

pub use shapley::{additive_shapley, shapley, ShapleyAttribution, ShapleyMode, MAX_EXACT_FEATURES};
pub use wasserstein::wasserstein_1d;

pub const DEFAULT_BACKGROUND_SIZE: usize = 200;

/// Scale on which a probabilistic audit classifier is explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutput {
    #[default]
    LogOdds,
    Probability,
}

/// Classifier trained to reproduce a selective model's decisions; label 1
/// means accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditModel {
    pub classifier: FittedModel,
    pub feature_names: Vec<String>,
    pub output: AuditOutput,
    pub training_auc: f64,
}

pub fn fit_audit(
    x_val: ArrayView2<f64>,
    accepted: &[bool],
    feature_names: &[String],
    spec: &LearnerSpec,
    output: AuditOutput,
    seed: u64,
) -> Result<AuditModel> {
    if accepted.len() != x_val.nrows() {
        return Err(Error::DimensionMismatch { expected: x_val.nrows(), found: accepted.len() });
    }
    if feature_names.len() != x_val.ncols() {
        return Err(Error::DimensionMismatch { expected: x_val.ncols(), found: feature_names.len() });
    }
    if accepted.iter().all(|&a| a) || accepted.iter().all(|&a| !a) {
        return Err(Error::DegenerateSelection);
    }
    let labels: Vec<f64> = accepted.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let classifier = fit(spec, x_val, &labels, seed)?;
    let mut audit = AuditModel {
        classifier,
        feature_names: feature_names.to_vec(),
        output,
        training_auc: f64::NAN,
    };
    audit.training_auc = audit.auc(x_val, accepted)?;
    Ok(audit)
}

impl AuditModel {
    /// The explained output for one row.
    pub fn output_row(&self, row: &[f64]) -> f64 {
        if self.classifier.spec.is_classifier() && self.output == AuditOutput::LogOdds {
            self.classifier.decision_row(row).expect("classifier has a decision function")
        } else {
            self.classifier.predict_row(row)
        }
    }

    pub fn outputs(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::DimensionMismatch { expected: self.feature_names.len(), found: x.ncols() });
        }
        Ok(x.rows().into_iter().map(|r| self.output_row(&r.to_vec())).collect())
    }

    /// Area under the ROC curve of the audit output for predicting acceptance.
    pub fn auc(&self, x: ArrayView2<f64>, accepted: &[bool]) -> Result<f64> {
        let scores = self.outputs(x)?;
        stats::auc(&scores, accepted).ok_or(Error::DegenerateSelection)
    }

    pub fn shapley(
        &self,
        x: ArrayView2<f64>,
        background: ArrayView2<f64>,
        mode: ShapleyMode,
        seed: u64,
    ) -> Result<ShapleyAttribution> {
        if mode == ShapleyMode::Exact {
            if let Some((w, b)) = self.additive_form() {
                return additive_shapley(w, b, x, background, &self.feature_names);
            }
        }
        shapley(&|row: &[f64]| self.output_row(row), x, background, &self.feature_names, mode, seed)
    }

    /// Weights and intercept when the explained output is affine in the features.
    fn additive_form(&self) -> Option<(&[f64], f64)> {
        match &self.classifier.params {
            ModelParams::Logistic { weights, bias } if self.output == AuditOutput::LogOdds => Some((weights, *bias)),
            ModelParams::Linear { coefficients, intercept } => Some((coefficients, *intercept)),
            _ => None,
        }
    }
}

/// Seeded sample of at most `size` rows, in their original order.
pub fn sample_background(x: ArrayView2<f64>, size: usize, seed: u64) -> Array2<f64> {
    let n = x.nrows();
    if size >= n {
        return x.to_owned();
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::BACKGROUND));
    let mut rows = sample(&mut rng, n, size).into_vec();
    rows.sort_unstable();
    x.select(Axis(0), &rows)
}

/// Features shifted together in one arm of the study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftScenario {
    pub name: String,
    pub features: Vec<String>,
}

impl ShiftScenario {
    pub fn univariate(feature: &str) -> Self {
        Self { name: feature.to_string(), features: vec![feature.to_string()] }
    }

    pub fn joint(features: &[String]) -> Self {
        Self { name: format!("joint({})", features.join("+")), features: features.to_vec() }
    }

    fn label(&self, feature: &str) -> String {
        if self.features.len() == 1 && self.name == self.features[0] {
            feature.to_string()
        } else {
            format!("{}:{feature}", self.name)
        }
    }
}

/// One univariate scenario per feature.
pub fn univariate_scenarios(features: &[String]) -> Vec<ShiftScenario> {
    features.iter().map(|f| ShiftScenario::univariate(f)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftOptions {
    pub noise_mean: f64,
    pub noise_sd: f64,
    pub repeats: usize,
    pub mode: ShapleyMode,
    /// Per-feature multiplier applied to the noise, indexed like the
    /// dataset columns; `None` shifts every feature on its own scale.
    pub feature_scales: Option<Vec<f64>>,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        Self { noise_mean: 5.0, noise_sd: 1.0, repeats: 5, mode: ShapleyMode::Exact, feature_scales: None }
    }
}

/// Result for one shifted feature of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub scenario: String,
    pub feature: String,
    /// Mean over repeats of the Wasserstein-1 distance between the feature's
    /// Shapley values before and after the shift.
    pub mean_distance: f64,
    /// Sample standard deviation of the distance over repeats.
    pub sd: f64,
    pub repeats: usize,
    /// Mean over repeats of (post-shift − pre-shift) mean Shapley value.
    pub mean_shapley_change: f64,
    /// Fraction of shifted rows the selective model still accepts.
    pub acceptance_after: f64,
    /// Distance in each repeat.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub n_rows: usize,
    pub options: ShiftOptions,
    pub rows: Vec<ShiftRow>,
}

impl ShiftReport {
    pub fn row(&self, label: &str) -> Option<&ShiftRow> {
        self.rows.iter().find(|r| r.feature == label)
    }
}

#[derive(Serialize)]
struct TableRow<'a> {
    feature: &'a str,
    mean_distance: f64,
    sd: f64,
    repeats: usize,
}

/// Writes `feature, mean_distance, sd, repeats`.
pub fn write_shift_csv<W: Write>(report: &ShiftReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if report.rows.is_empty() {
        w.write_record(["feature", "mean_distance", "sd", "repeats"])?;
    }
    for r in &report.rows {
        w.serialize(TableRow { feature: &r.feature, mean_distance: r.mean_distance, sd: r.sd, repeats: r.repeats })?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// One row per (scenario feature, repeat) with the scenario-level
/// Shapley change and post-shift acceptance.
pub fn write_shift_details_csv<W: Write>(report: &ShiftReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "scenario",
        "feature",
        "repeat",
        "distance",
        "mean_shapley_change",
        "acceptance_after",
    ])?;
    for r in &report.rows {
        for (k, d) in r.distances.iter().enumerate() {
            w.write_record([
                r.scenario.clone(),
                r.feature.clone(),
                k.to_string(),
                d.to_string(),
                r.mean_shapley_change.to_string(),
                r.acceptance_after.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Shapley matrix with one row per explained point, preceded by its row id
/// and the base value.
pub fn write_shapley_csv<W: Write>(attr: &ShapleyAttribution, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["row_id".to_string(), "base_value".to_string()];
    header.extend(attr.feature_names.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in attr.values.rows().into_iter().enumerate() {
        let mut rec = vec![i.to_string(), attr.base_value.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Feature values paired with their attributions, for beeswarm plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmFeature {
    pub feature: String,
    /// `(feature value, attribution)` per explained row.
    pub points: Vec<(f64, f64)>,
}

pub fn beeswarm(attr: &ShapleyAttribution, x: ArrayView2<f64>) -> Result<Vec<BeeswarmFeature>> {
    if x.dim() != attr.values.dim() {
        return Err(Error::DimensionMismatch { expected: attr.values.nrows(), found: x.nrows() });
    }
    Ok(attr
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| BeeswarmFeature {
            feature: name.clone(),
            points: x.column(j).iter().copied().zip(attr.values.column(j).iter().copied()).collect(),
        })
        .collect())
}

/// Shifts each scenario's features on the accepted rows by Gaussian noise
/// and compares each shifted feature's Shapley distribution with the
/// unshifted one. The background and the selective threshold stay fixed;
/// repeats differ only in the noise draw.
pub fn shift_audit(
    selective: &SelectiveModel,
    audit: &AuditModel,
    accepted: &Dataset,
    background: ArrayView2<f64>,
    scenarios: &[ShiftScenario],
    options: &ShiftOptions,
    seed: u64,
) -> Result<ShiftReport> {
    if accepted.n() == 0 {
        return Err(Error::InvalidParameter("no accepted rows to shift".into()));
    }
    if options.repeats < 1 {
        return Err(Error::InvalidParameter("shift study needs at least one repeat".into()));
    }
    if let Some(all) = &options.feature_scales {
        if all.len() != accepted.d() {
            return Err(Error::DimensionMismatch { expected: accepted.d(), found: all.len() });
        }
    }
    let shapley_seed = derive_seed(seed, stream::SHAPLEY);
    let base = audit.shapley(accepted.features.view(), background, options.mode, shapley_seed)?;
    let mut rows = Vec::new();
    for (s, scenario) in scenarios.iter().enumerate() {
        let columns = scenario
            .features
            .iter()
            .map(|f| accepted.column_index(f).ok_or_else(|| Error::UnknownFeature(f.clone())))
            .collect::<Result<Vec<_>>>()?;
        let scales: Option<Vec<f64>> = options
            .feature_scales
            .as_ref()
            .map(|all| columns.iter().map(|&j| all[j]).collect());
        let scenario_seed = derive_seed(seed, s as u64);
        let mut distances = vec![Vec::new(); columns.len()];
        let mut changes = vec![Vec::new(); columns.len()];
        let mut acceptance = Vec::new();
        for rep in 0..options.repeats {
            let shifted = perturb_columns_scaled(
                accepted,
                &columns,
                options.noise_mean,
                options.noise_sd,
                scales.as_deref(),
                derive_seed(scenario_seed, rep as u64),
            )?;
            let attr = audit.shapley(shifted.features.view(), background, options.mode, shapley_seed)?;
            for (k, &j) in columns.iter().enumerate() {
                let before = base.column(j);
                let after = attr.column(j);
                distances[k].push(wasserstein_1d(&before, &after)?);
                changes[k].push(stats::mean(&after) - stats::mean(&before));
            }
            let decisions = selective.decide(&selective.score_batch(shifted.features.view(), Some(&shifted.target))?);
            acceptance.push(decisions.iter().filter(|p| p.accepted).count() as f64 / decisions.len() as f64);
        }
        let acceptance_after = stats::mean(&acceptance);
        for (k, feature) in scenario.features.iter().enumerate() {
            rows.push(ShiftRow {
                scenario: scenario.name.clone(),
                feature: scenario.label(feature),
                mean_distance: stats::mean(&distances[k]),
                sd: stats::sample_sd(&distances[k]),
                repeats: options.repeats,
                mean_shapley_change: stats::mean(&changes[k]),
                acceptance_after,
                distances: distances[k].clone(),
            });
        }
    }
    Ok(ShiftReport { n_rows: accepted.n(), options: options.clone(), rows })
}
