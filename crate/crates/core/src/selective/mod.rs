//! Selective regressors: a point predictor, an uncertainty score, and a
//! threshold `τ` calibrated so that a target fraction `α` of calibration
//! rows satisfies `score <= τ`.
//!
//! Scores measure uncertainty (higher means less confident); the
//! confidence function is their negation. Methods:
//!
//! | method     | predictor        | score                                          |
//! |------------|------------------|------------------------------------------------|
//! | DoubtVar   | bootstrap mean   | variance of the bootstrap uncertainty set      |
//! | DoubtInt   | bootstrap mean   | width of its 95% interval                      |
//! | PlugIn     | full-data fit    | ĝ fitted to in-sample squared residuals        |
//! | SCross     | full-data fit    | ĝ fitted to out-of-fold squared residuals      |
//! | CV+        | mean of folds    | width of the CV+ conformal interval            |
//! | GoldCase   | full-data fit    | true squared residual (oracle, needs labels)   |

mod calibrate;
mod crossfit;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit, FittedModel, LearnerSpec};
use crate::rng::{derive_seed, stream};
use crate::stats;
use crate::uncertainty::{fit_ensemble_with, BootstrapEnsemble, EnsembleOptions};

pub use calibrate::{accepts, calibrate_threshold, check_coverage};
pub use crossfit::{cross_fit, cross_fitted_residuals, kfold_assignment, CrossFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DoubtVar,
    DoubtInt,
    Plugin,
    Scross,
    Cvplus,
    Goldcase,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::DoubtVar,
        Method::DoubtInt,
        Method::Plugin,
        Method::Scross,
        Method::Cvplus,
        Method::Goldcase,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::DoubtVar => "doubt_var",
            Method::DoubtInt => "doubt_int",
            Method::Plugin => "plugin",
            Method::Scross => "scross",
            Method::Cvplus => "cvplus",
            Method::Goldcase => "goldcase",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            Method::DoubtVar => "DoubtVar",
            Method::DoubtInt => "DoubtInt",
            Method::Plugin => "PlugIn",
            Method::Scross => "SCross",
            Method::Cvplus => "CV+",
            Method::Goldcase => "GoldCase",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

/// Knobs shared by the builders.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveOptions {
    pub folds: usize,
    /// Nominal level of the CV+ intervals.
    pub conformal_level: f64,
    /// Quantiles of the bootstrap interval scored by DoubtInt.
    pub interval_quantiles: (f64, f64),
    pub ensemble: EnsembleOptions,
    /// Learner for ĝ; the base learner when `None`.
    pub residual_learner: Option<LearnerSpec>,
}

impl Default for SelectiveOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            conformal_level: 0.95,
            interval_quantiles: (0.025, 0.975),
            ensemble: EnsembleOptions::default(),
            residual_learner: None,
        }
    }
}

/// CV+ state: fold models and each training row's absolute out-of-fold
/// residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlusModel {
    pub fold_models: Vec<FittedModel>,
    pub fold_of_row: Vec<usize>,
    pub abs_residuals: Vec<f64>,
    pub level: f64,
    /// 1-based order statistic for the lower end, `⌊(1−level)(n+1)⌋`.
    pub lower_rank: usize,
    /// 1-based order statistic for the upper end, `⌈level·(n+1)⌉`.
    pub upper_rank: usize,
}

impl CvPlusModel {
    pub fn new(cf: CrossFit, y: &[f64], level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!("conformal level {level} not in (0,1)")));
        }
        let n = y.len();
        let lower_rank = ((1.0 - level) * (n + 1) as f64 + 1e-9).floor() as usize;
        let upper_rank = (level * (n + 1) as f64 - 1e-9).ceil() as usize;
        if lower_rank < 1 || upper_rank > n {
            return Err(Error::TooFewForConformal { n, level });
        }
        let abs_residuals = cf.out_of_fold.iter().zip(y).map(|(p, t)| (t - p).abs()).collect();
        Ok(Self {
            fold_models: cf.fold_models,
            fold_of_row: cf.fold_of_row,
            abs_residuals,
            level,
            lower_rank,
            upper_rank,
        })
    }

    /// Interval at a point given each fold model's prediction there.
    pub fn interval_from_fold_predictions(&self, fold_preds: &[f64]) -> (f64, f64) {
        let mut lows: Vec<f64> = self
            .fold_of_row
            .iter()
            .zip(&self.abs_residuals)
            .map(|(&k, r)| fold_preds[k] - r)
            .collect();
        let mut highs: Vec<f64> = self
            .fold_of_row
            .iter()
            .zip(&self.abs_residuals)
            .map(|(&k, r)| fold_preds[k] + r)
            .collect();
        (
            stats::kth_smallest(&mut lows, self.lower_rank),
            stats::kth_smallest(&mut highs, self.upper_rank),
        )
    }

    fn fold_predictions(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        let per_fold = self
            .fold_models
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..x.nrows())
            .map(|i| per_fold.iter().map(|p| p[i]).collect())
            .collect())
    }

    pub fn intervals(&self, x: ArrayView2<f64>) -> Result<Vec<(f64, f64)>> {
        Ok(self
            .fold_predictions(x)?
            .par_iter()
            .map(|fp| self.interval_from_fold_predictions(fp))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Model { model: FittedModel },
    /// Mean of the bootstrap members held by the scorer.
    EnsembleMean,
    /// Mean of the CV+ fold models held by the scorer.
    FoldMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertaintyScorer {
    BootstrapVariance { ensemble: BootstrapEnsemble },
    BootstrapInterval { ensemble: BootstrapEnsemble, lo_q: f64, hi_q: f64 },
    ResidualModel { residual_model: FittedModel },
    Conformal { conformal: CvPlusModel },
    /// Squared residual of the predictor against the true label.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectivePrediction {
    pub accepted: bool,
    /// Present exactly when accepted.
    pub value: Option<f64>,
    pub score: f64,
}

/// Point predictions and uncertainty scores for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub predictions: Vec<f64>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectiveModel {
    pub method: Method,
    pub predictor: Predictor,
    pub scorer: UncertaintyScorer,
    pub threshold: f64,
    pub target_coverage: f64,
    /// Scores the threshold was calibrated on; kept so the model can be
    /// recalibrated for another coverage without refitting.
    pub calibration_scores: Vec<f64>,
}

const SELECTIVE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SelectiveEnvelope {
    format_version: u32,
    #[serde(flatten)]
    model: SelectiveModel,
}

impl SelectiveModel {
    fn assemble(
        method: Method,
        predictor: Predictor,
        scorer: UncertaintyScorer,
        x_cal: ArrayView2<f64>,
        y_cal: Option<&[f64]>,
        alpha: f64,
    ) -> Result<Self> {
        check_coverage(alpha)?;
        if x_cal.nrows() == 0 {
            return Err(Error::EmptyCalibration);
        }
        let mut model = SelectiveModel {
            method,
            predictor,
            scorer,
            threshold: f64::NAN,
            target_coverage: alpha,
            calibration_scores: Vec::new(),
        };
        model.calibration_scores = model.score_batch(x_cal, y_cal)?.scores;
        model.threshold = calibrate_threshold(&model.calibration_scores, alpha)?;
        Ok(model)
    }

    pub fn n_features(&self) -> usize {
        match (&self.predictor, &self.scorer) {
            (Predictor::Model { model }, _) => model.n_features,
            (_, UncertaintyScorer::BootstrapVariance { ensemble })
            | (_, UncertaintyScorer::BootstrapInterval { ensemble, .. }) => ensemble.n_features(),
            (_, UncertaintyScorer::Conformal { conformal }) => conformal.fold_models[0].n_features,
            _ => unreachable!("predictor without a model"),
        }
    }

    pub fn requires_labels(&self) -> bool {
        matches!(self.scorer, UncertaintyScorer::Oracle)
    }

    /// Predictions and scores. `y` is only read by the oracle scorer.
    pub fn score_batch(&self, x: ArrayView2<f64>, y: Option<&[f64]>) -> Result<Scored> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.ncols(),
            });
        }
        match &self.scorer {
            UncertaintyScorer::BootstrapVariance { ensemble } => {
                let preds = ensemble.member_predictions(x)?;
                let rows: Vec<Vec<f64>> = preds.rows().into_iter().map(|r| r.to_vec()).collect();
                Ok(Scored {
                    predictions: rows.iter().map(|r| stats::mean(r)).collect(),
                    scores: rows.iter().map(|r| ensemble.variance_from_predictions(r)).collect(),
                })
            }
            UncertaintyScorer::BootstrapInterval { ensemble, lo_q, hi_q } => {
                let preds = ensemble.member_predictions(x)?;
                let rows: Vec<Vec<f64>> = preds.rows().into_iter().map(|r| r.to_vec()).collect();
                let scores = rows
                    .par_iter()
                    .map(|r| ensemble.interval_from_predictions(r, *lo_q, *hi_q).map(|(lo, hi)| hi - lo))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Scored {
                    predictions: rows.iter().map(|r| stats::mean(r)).collect(),
                    scores,
                })
            }
            UncertaintyScorer::ResidualModel { residual_model } => Ok(Scored {
                predictions: self.point_predictions(x)?,
                scores: residual_model.predict(x)?,
            }),
            UncertaintyScorer::Conformal { conformal } => {
                let fold_preds = conformal.fold_predictions(x)?;
                let scores = fold_preds
                    .par_iter()
                    .map(|fp| {
                        let (lo, hi) = conformal.interval_from_fold_predictions(fp);
                        hi - lo
                    })
                    .collect();
                Ok(Scored {
                    predictions: fold_preds.iter().map(|fp| stats::mean(fp)).collect(),
                    scores,
                })
            }
            UncertaintyScorer::Oracle => {
                let y = y.ok_or(Error::LabelsRequired)?;
                if y.len() != x.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: x.nrows(),
                        found: y.len(),
                    });
                }
                let predictions = self.point_predictions(x)?;
                let scores = predictions.iter().zip(y).map(|(p, t)| (t - p).powi(2)).collect();
                Ok(Scored { predictions, scores })
            }
        }
    }

    /// Full-coverage point predictions.
    pub fn point_predictions(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        match (&self.predictor, &self.scorer) {
            (Predictor::Model { model }, _) => model.predict(x),
            (Predictor::EnsembleMean, UncertaintyScorer::BootstrapVariance { ensemble })
            | (Predictor::EnsembleMean, UncertaintyScorer::BootstrapInterval { ensemble, .. }) => {
                ensemble.predict_mean(x)
            }
            (Predictor::FoldMean, UncertaintyScorer::Conformal { conformal }) => Ok(conformal
                .fold_predictions(x)?
                .iter()
                .map(|fp| stats::mean(fp))
                .collect()),
            _ => Err(Error::InvalidParameter("predictor does not match scorer state".into())),
        }
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.score_batch(x, None)?.scores)
    }

    /// Threshold for another target coverage on the stored calibration scores.
    pub fn threshold_for(&self, alpha: f64) -> Result<f64> {
        calibrate_threshold(&self.calibration_scores, alpha)
    }

    pub fn recalibrate(&mut self, alpha: f64) -> Result<()> {
        self.threshold = self.threshold_for(alpha)?;
        self.target_coverage = alpha;
        Ok(())
    }

    pub fn decide(&self, scored: &Scored) -> Vec<SelectivePrediction> {
        scored
            .predictions
            .iter()
            .zip(&scored.scores)
            .map(|(&p, &s)| {
                let accepted = accepts(s, self.threshold);
                SelectivePrediction {
                    accepted,
                    value: accepted.then_some(p),
                    score: s,
                }
            })
            .collect()
    }

    pub fn predict_selective(&self, x: ArrayView2<f64>) -> Result<Vec<SelectivePrediction>> {
        Ok(self.decide(&self.score_batch(x, None)?))
    }

    pub fn predict_selective_labeled(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<Vec<SelectivePrediction>> {
        Ok(self.decide(&self.score_batch(x, Some(y))?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SelectiveEnvelope {
            format_version: SELECTIVE_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let envelope: SelectiveEnvelope = serde_json::from_str(json)?;
        if envelope.format_version != SELECTIVE_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported selective model format version {}",
                envelope.format_version
            )));
        }
        Ok(envelope.model)
    }
}

fn require_regressor(spec: &LearnerSpec) -> Result<()> {
    if spec.is_classifier() {
        return Err(Error::InvalidParameter(format!(
            "`{}` is a classifier; selective regression needs a regressor",
            spec.name()
        )));
    }
    Ok(())
}

/// Base learner fitted on the full training set, as used by PlugIn,
/// SCross and GoldCase. Builders given the same seed produce the same fit.
pub fn fit_predictor(spec: &LearnerSpec, x_train: ArrayView2<f64>, y_train: &[f64], seed: u64) -> Result<FittedModel> {
    require_regressor(spec)?;
    fit(spec, x_train, y_train, derive_seed(seed, stream::LEARNER))
}

/// DoubtVar or DoubtInt around an already fitted ensemble.
pub fn from_ensemble(
    method: Method,
    ensemble: BootstrapEnsemble,
    x_cal: ArrayView2<f64>,
    alpha: f64,
    options: &SelectiveOptions,
) -> Result<SelectiveModel> {
    let scorer = match method {
        Method::DoubtVar => UncertaintyScorer::BootstrapVariance { ensemble },
        Method::DoubtInt => UncertaintyScorer::BootstrapInterval {
            ensemble,
            lo_q: options.interval_quantiles.0,
            hi_q: options.interval_quantiles.1,
        },
        other => {
            return Err(Error::InvalidParameter(format!("{other} is not a bootstrap method")));
        }
    };
    SelectiveModel::assemble(method, Predictor::EnsembleMean, scorer, x_cal, None, alpha)
}

pub fn build_doubt_var(
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    seed: u64,
) -> Result<SelectiveModel> {
    build(Method::DoubtVar, spec, x_train, y_train, x_cal, alpha, &SelectiveOptions::default(), seed)
}

pub fn build_doubt_int(
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    seed: u64,
) -> Result<SelectiveModel> {
    build(Method::DoubtInt, spec, x_train, y_train, x_cal, alpha, &SelectiveOptions::default(), seed)
}

pub fn build_plugin(
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    seed: u64,
) -> Result<SelectiveModel> {
    build(Method::Plugin, spec, x_train, y_train, x_cal, alpha, &SelectiveOptions::default(), seed)
}

pub fn build_scross(
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    folds: usize,
    seed: u64,
) -> Result<SelectiveModel> {
    let options = SelectiveOptions {
        folds,
        ..SelectiveOptions::default()
    };
    build(Method::Scross, spec, x_train, y_train, x_cal, alpha, &options, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn build_cvplus(
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    folds: usize,
    level: f64,
    seed: u64,
) -> Result<SelectiveModel> {
    let options = SelectiveOptions {
        folds,
        conformal_level: level,
        ..SelectiveOptions::default()
    };
    build(Method::Cvplus, spec, x_train, y_train, x_cal, alpha, &options, seed)
}

/// Oracle selector: rejects the rows whose true squared residual under
/// `predictor` exceeds the `alpha`-quantile of those residuals.
pub fn build_goldcase(predictor: FittedModel, x_test: ArrayView2<f64>, y_test: &[f64], alpha: f64) -> Result<SelectiveModel> {
    SelectiveModel::assemble(
        Method::Goldcase,
        Predictor::Model { model: predictor },
        UncertaintyScorer::Oracle,
        x_test,
        Some(y_test),
        alpha,
    )
}

/// PlugIn with a given full-data predictor.
pub fn build_plugin_with(
    predictor: FittedModel,
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    options: &SelectiveOptions,
    seed: u64,
) -> Result<SelectiveModel> {
    let fitted = predictor.predict(x_train)?;
    let squared: Vec<f64> = fitted.iter().zip(y_train).map(|(p, t)| (t - p).powi(2)).collect();
    let residual_spec = options.residual_learner.as_ref().unwrap_or(spec);
    require_regressor(residual_spec)?;
    let residual_model = fit(residual_spec, x_train, &squared, derive_seed(seed, stream::RESIDUAL_MODEL))?;
    SelectiveModel::assemble(
        Method::Plugin,
        Predictor::Model { model: predictor },
        UncertaintyScorer::ResidualModel { residual_model },
        x_cal,
        None,
        alpha,
    )
}

/// SCross with a given full-data predictor.
#[allow(clippy::too_many_arguments)]
pub fn build_scross_with(
    predictor: FittedModel,
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    options: &SelectiveOptions,
    seed: u64,
) -> Result<SelectiveModel> {
    let squared = cross_fitted_residuals(spec, x_train, y_train, options.folds, seed)?;
    let residual_spec = options.residual_learner.as_ref().unwrap_or(spec);
    require_regressor(residual_spec)?;
    let residual_model = fit(residual_spec, x_train, &squared, derive_seed(seed, stream::RESIDUAL_MODEL))?;
    SelectiveModel::assemble(
        Method::Scross,
        Predictor::Model { model: predictor },
        UncertaintyScorer::ResidualModel { residual_model },
        x_cal,
        None,
        alpha,
    )
}

/// Fits and calibrates any label-free method.
#[allow(clippy::too_many_arguments)]
pub fn build(
    method: Method,
    spec: &LearnerSpec,
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_cal: ArrayView2<f64>,
    alpha: f64,
    options: &SelectiveOptions,
    seed: u64,
) -> Result<SelectiveModel> {
    require_regressor(spec)?;
    check_coverage(alpha)?;
    match method {
        Method::DoubtVar | Method::DoubtInt => {
            let ensemble = fit_ensemble_with(spec, x_train, y_train, options.ensemble, seed)?;
            from_ensemble(method, ensemble, x_cal, alpha, options)
        }
        Method::Plugin => {
            let predictor = fit_predictor(spec, x_train, y_train, seed)?;
            build_plugin_with(predictor, spec, x_train, y_train, x_cal, alpha, options, seed)
        }
        Method::Scross => {
            let predictor = fit_predictor(spec, x_train, y_train, seed)?;
            build_scross_with(predictor, spec, x_train, y_train, x_cal, alpha, options, seed)
        }
        Method::Cvplus => {
            let cf = cross_fit(spec, x_train, y_train, options.folds, seed)?;
            let conformal = CvPlusModel::new(cf, y_train, options.conformal_level)?;
            SelectiveModel::assemble(
                Method::Cvplus,
                Predictor::FoldMean,
                UncertaintyScorer::Conformal { conformal },
                x_cal,
                None,
                alpha,
            )
        }
        Method::Goldcase => Err(Error::LabelsRequired),
    }
}
