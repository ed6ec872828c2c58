//! Base learners behind one fit/predict surface.
//!
//! Every learner is implemented here from scratch: ordinary least squares,
//! CART regression trees, random forests, squared-error gradient boosting
//! and L2-regularised logistic regression (used by the audit model).

mod forest;
mod gbt;
mod linear;
mod logistic;
mod tree;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use logistic::{logistic_objective, sigmoid};
pub use tree::{Node, RegressionTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Fraction of features drawn as split candidates at every node.
    pub feature_fraction: f64,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            feature_fraction: 1.0 / 3.0,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values.
    pub l2_regularization: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            min_samples_leaf: 1,
            l2_regularization: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    /// Penalty `½·l2_strength·‖w‖²` added to the summed log-loss; the bias
    /// is not penalised.
    pub l2_strength: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the largest gradient component.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2_strength: 1.0,
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Linear,
    Tree(TreeParams),
    Forest(ForestParams),
    Gbt(GbtParams),
    Logistic(LogisticParams),
}

impl LearnerSpec {
    pub fn tree() -> Self {
        LearnerSpec::Tree(TreeParams::default())
    }

    pub fn forest() -> Self {
        LearnerSpec::Forest(ForestParams::default())
    }

    pub fn gbt() -> Self {
        LearnerSpec::Gbt(GbtParams::default())
    }

    pub fn logistic() -> Self {
        LearnerSpec::Logistic(LogisticParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Linear => "linear",
            LearnerSpec::Tree(_) => "tree",
            LearnerSpec::Forest(_) => "forest",
            LearnerSpec::Gbt(_) => "gbt",
            LearnerSpec::Logistic(_) => "logistic",
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, LearnerSpec::Logistic(_))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            LearnerSpec::Linear => Ok(()),
            LearnerSpec::Tree(p) => {
                if p.min_samples_leaf < 1 {
                    return bad("tree min_samples_leaf must be >= 1".into());
                }
                Ok(())
            }
            LearnerSpec::Forest(p) => {
                if p.n_trees < 1 || p.min_samples_leaf < 1 {
                    return bad("forest counts must be >= 1".into());
                }
                if !(p.feature_fraction > 0.0 && p.feature_fraction <= 1.0) {
                    return bad(format!("forest feature_fraction {} not in (0,1]", p.feature_fraction));
                }
                Ok(())
            }
            LearnerSpec::Gbt(p) => {
                if p.n_rounds < 1 || p.max_depth < 1 || p.min_samples_leaf < 1 {
                    return bad("gbt counts must be >= 1".into());
                }
                if !(p.learning_rate > 0.0) || !p.learning_rate.is_finite() {
                    return bad(format!("gbt learning_rate {} must be > 0", p.learning_rate));
                }
                if !(p.l2_regularization >= 0.0) || !p.l2_regularization.is_finite() {
                    return bad(format!("gbt l2_regularization {} must be >= 0", p.l2_regularization));
                }
                Ok(())
            }
            LearnerSpec::Logistic(p) => {
                if p.max_iterations < 1 {
                    return bad("logistic max_iterations must be >= 1".into());
                }
                if !(p.l2_strength >= 0.0) || !(p.tolerance > 0.0) {
                    return bad("logistic l2_strength must be >= 0 and tolerance > 0".into());
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear { coefficients: Vec<f64>, intercept: f64 },
    Tree { tree: RegressionTree },
    Forest { trees: Vec<RegressionTree> },
    Gbt { base: f64, learning_rate: f64, trees: Vec<RegressionTree> },
    Logistic { weights: Vec<f64>, bias: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub n_features: usize,
    pub n_train: usize,
    pub params: ModelParams,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format_version: u32,
    model: FittedModel,
}

/// Trains `spec` on `(x, y)`. `seed` drives any internal randomness
/// (forest resampling and feature draws); the other learners ignore it.
pub fn fit(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[f64], seed: u64) -> Result<FittedModel> {
    spec.validate()?;
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 training rows, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    let params = match spec {
        LearnerSpec::Linear => linear::fit(x, y),
        LearnerSpec::Tree(p) => ModelParams::Tree {
            tree: tree::fit_single(x, y, p),
        },
        LearnerSpec::Forest(p) => ModelParams::Forest {
            trees: forest::fit(x, y, p, seed),
        },
        LearnerSpec::Gbt(p) => gbt::fit(x, y, p),
        LearnerSpec::Logistic(p) => logistic::fit(x, y, p)?,
    };
    Ok(FittedModel {
        spec: spec.clone(),
        n_features: x.ncols(),
        n_train: n,
        params,
    })
}

impl FittedModel {
    fn check_width(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Prediction for one row; probability of class 1 for the classifier.
    /// The row length is not checked.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Linear { coefficients, intercept } => {
                intercept + coefficients.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()
            }
            ModelParams::Tree { tree } => tree.predict_row(row),
            ModelParams::Forest { trees } => {
                trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
            }
            ModelParams::Gbt { base, learning_rate, trees } => {
                base + learning_rate * trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
            }
            ModelParams::Logistic { .. } => sigmoid(self.linear_score(row)),
        }
    }

    fn linear_score(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Logistic { weights, bias } => {
                bias + weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>()
            }
            _ => unreachable!("linear score of a non-logistic model"),
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_width(&x)?;
        let mut row = vec![0.0; self.n_features];
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                row.iter_mut().zip(r.iter()).for_each(|(dst, src)| *dst = *src);
                self.predict_row(&row)
            })
            .collect())
    }

    fn require_classifier(&self) -> Result<()> {
        match self.params {
            ModelParams::Logistic { .. } => Ok(()),
            _ => Err(Error::WrongModelKind {
                expected: "logistic",
                found: self.spec.name(),
            }),
        }
    }

    /// Class-1 probabilities; class decision is `p >= 0.5`.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.require_classifier()?;
        self.predict(x)
    }

    /// Log-odds `w·x + b` of the classifier.
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.require_classifier()?;
        self.check_width(&x)?;
        let mut row = vec![0.0; self.n_features];
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                row.iter_mut().zip(r.iter()).for_each(|(dst, src)| *dst = *src);
                self.linear_score(&row)
            })
            .collect())
    }

    pub fn decision_row(&self, row: &[f64]) -> Result<f64> {
        self.require_classifier()?;
        Ok(self.linear_score(row))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelEnvelope {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let envelope: ModelEnvelope = serde_json::from_str(json)?;
        if envelope.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format version {}",
                envelope.format_version
            )));
        }
        Ok(envelope.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split_rows, synth_heteroscedastic, NoiseProfile};
    use crate::stats;
    use ndarray::{array, Array2};

    #[test]
    fn linear_recovers_exact_line() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0]];
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v + 1.0).collect();
        let model = fit(&LearnerSpec::Linear, x.view(), &y, 0).unwrap();
        let ModelParams::Linear { coefficients, intercept } = &model.params else { panic!() };
        assert!((coefficients[0] - 2.0).abs() < 1e-6);
        assert!((intercept - 1.0).abs() < 1e-6);
        let pred = model.predict(x.view()).unwrap();
        let mse: f64 = pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / 5.0;
        assert!(mse < 1e-10);
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn depth_zero_tree_predicts_mean() {
        let x = array![[0.0], [1.0], [2.0]];
        let spec = LearnerSpec::Tree(TreeParams {
            max_depth: Some(0),
            min_samples_leaf: 1,
        });
        let model = fit(&spec, x.view(), &[1.0, 2.0, 3.0], 0).unwrap();
        assert_eq!(model.predict(x.view()).unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn gbt_beats_constant_mean() {
        let data = synth_heteroscedastic(2000, 5, NoiseProfile::default(), 21).dataset;
        let plan = split_rows(data.n(), &[("train", 0.8), ("test", 0.2)], 3).unwrap();
        let train = data.subset(&plan.rows_of(0));
        let test = data.subset(&plan.rows_of(1));
        let spec = LearnerSpec::Gbt(GbtParams {
            n_rounds: 50,
            learning_rate: 0.3,
            max_depth: 3,
            min_samples_leaf: 1,
            l2_regularization: 1.0,
        });
        let model = fit(&spec, train.features.view(), &train.target, 0).unwrap();
        let pred = model.predict(test.features.view()).unwrap();
        let mse = |p: &[f64]| p.iter().zip(&test.target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let baseline = vec![stats::mean(&train.target); test.n()];
        assert!(mse(&pred) < mse(&baseline));
    }

    #[test]
    fn identical_trees_forest_is_constant() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let spec = LearnerSpec::Forest(ForestParams {
            n_trees: 5,
            max_depth: Some(0),
            ..ForestParams::default()
        });
        let model = fit(&spec, x.view(), &[4.0; 4], 1).unwrap();
        assert_eq!(model.predict(x.view()).unwrap(), vec![4.0; 4]);
    }

    #[test]
    fn zero_weight_logistic_is_half() {
        let model = FittedModel {
            spec: LearnerSpec::logistic(),
            n_features: 2,
            n_train: 2,
            params: ModelParams::Logistic {
                weights: vec![0.0, 0.0],
                bias: 0.0,
            },
        };
        let x = Array2::from_shape_fn((4, 2), |(i, j)| (i + j) as f64);
        assert_eq!(model.predict_proba(x.view()).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn proba_rejects_regressors() {
        let x = array![[0.0], [1.0]];
        let model = fit(&LearnerSpec::Linear, x.view(), &[0.0, 1.0], 0).unwrap();
        assert!(matches!(model.predict_proba(x.view()), Err(Error::WrongModelKind { .. })));
    }

    #[test]
    fn dimension_mismatch_errors() {
        let x = array![[0.0], [1.0]];
        assert!(fit(&LearnerSpec::Linear, x.view(), &[0.0], 0).is_err());
        let model = fit(&LearnerSpec::Linear, x.view(), &[0.0, 1.0], 0).unwrap();
        assert!(model.predict(array![[0.0, 1.0]].view()).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let x = array![[0.0], [1.0]];
        let bad = LearnerSpec::Forest(ForestParams {
            feature_fraction: 0.0,
            ..ForestParams::default()
        });
        assert!(fit(&bad, x.view(), &[0.0, 1.0], 0).is_err());
        let bad = LearnerSpec::Gbt(GbtParams {
            learning_rate: 0.0,
            ..GbtParams::default()
        });
        assert!(fit(&bad, x.view(), &[0.0, 1.0], 0).is_err());
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let data = synth_heteroscedastic(200, 3, NoiseProfile::default(), 2).dataset;
        for spec in [LearnerSpec::Linear, LearnerSpec::tree(), LearnerSpec::gbt()] {
            let model = fit(&spec, data.features.view(), &data.target, 0).unwrap();
            let back = FittedModel::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(
                model.predict(data.features.view()).unwrap(),
                back.predict(data.features.view()).unwrap()
            );
        }
    }

    #[test]
    fn spec_json_is_tagged_and_strict() {
        let spec: LearnerSpec = serde_json::from_str(r#"{"kind":"gbt","n_rounds":10}"#).unwrap();
        assert_eq!(
            spec,
            LearnerSpec::Gbt(GbtParams {
                n_rounds: 10,
                ..GbtParams::default()
            })
        );
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"kind":"gbt","rounds":10}"#).is_err());
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"kind":"svm"}"#).is_err());
    }
}
