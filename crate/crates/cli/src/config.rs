//! Experiment configuration: a strict JSON document describing datasets,
//! methods, the learner, the coverage grid, seeds and the audit study.

use std::fs;
use std::path::{Path, PathBuf};

use selreg::dataset::NoiseProfile;
use selreg::explain::{AuditOutput, ShapleyMode, DEFAULT_BACKGROUND_SIZE};
use selreg::learners::LearnerSpec;
use selreg::metrics::{default_coverage_grid, DEFAULT_TOLERANCE};
use selreg::selective::Method;
use selreg::uncertainty::DEFAULT_SET_CAP;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Heteroscedastic generator over `d` uniform features.
    Synthetic {
        name: String,
        n: usize,
        d: usize,
        #[serde(default)]
        noise: NoiseProfile,
        #[serde(default)]
        seed: u64,
    },
    /// House-price-like generator with mixed numeric and categorical columns.
    HousePrices {
        name: String,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    /// A CSV file with a header row. Relative paths resolve against the
    /// working directory.
    Csv {
        name: String,
        path: PathBuf,
        target: String,
        /// Columns forced to categorical; others are inferred.
        #[serde(default)]
        categorical: Vec<String>,
    },
}

impl DatasetConfig {
    pub fn name(&self) -> &str {
        match self {
            DatasetConfig::Synthetic { name, .. } | DatasetConfig::HousePrices { name, .. } | DatasetConfig::Csv { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSpace {
    /// Noise is added to the min-max scaled features.
    #[default]
    Normalized,
    /// Noise is expressed in the original units of each feature.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub method: Method,
    pub target_coverage: f64,
    pub audit_learner: LearnerSpec,
    pub output: AuditOutput,
    /// Train / calibration / validation / test fractions.
    pub split: Vec<f64>,
    pub add_random_feature: bool,
    /// Features shifted one at a time; `None` shifts every feature.
    pub shift_features: Option<Vec<String>>,
    /// Features shifted together in one extra scenario.
    pub joint_shift: Option<Vec<String>>,
    pub noise_mean: f64,
    pub noise_sd: f64,
    pub repeats: usize,
    pub background_size: usize,
    pub shapley: ShapleyMode,
    pub shift_space: ShiftSpace,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            method: Method::DoubtVar,
            target_coverage: 0.8,
            audit_learner: LearnerSpec::logistic(),
            output: AuditOutput::LogOdds,
            split: vec![0.25, 0.25, 0.25, 0.25],
            add_random_feature: true,
            shift_features: None,
            joint_shift: None,
            noise_mean: 5.0,
            noise_sd: 1.0,
            repeats: 5,
            background_size: DEFAULT_BACKGROUND_SIZE,
            shapley: ShapleyMode::Exact,
            shift_space: ShiftSpace::Normalized,
        }
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_split() -> Vec<f64> {
    vec![0.6, 0.2, 0.2]
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_folds() -> usize {
    5
}

fn default_conformal_level() -> f64 {
    0.95
}

fn default_interval_quantiles() -> [f64; 2] {
    [0.025, 0.975]
}

fn default_set_cap() -> usize {
    DEFAULT_SET_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "LearnerSpec::gbt")]
    pub learner: LearnerSpec,
    /// Learner for the squared-residual model of PlugIn and SCross.
    #[serde(default)]
    pub residual_learner: Option<LearnerSpec>,
    #[serde(default = "default_coverage_grid")]
    pub coverages: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Train / calibration / test fractions.
    #[serde(default = "default_split")]
    pub split: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Bootstrap ensemble size; `max(2, ⌊√n⌋)` when absent.
    #[serde(default)]
    pub bootstraps: Option<usize>,
    #[serde(default = "default_conformal_level")]
    pub conformal_level: f64,
    #[serde(default = "default_interval_quantiles")]
    pub interval_quantiles: [f64; 2],
    #[serde(default = "default_set_cap")]
    pub set_cap: usize,
    #[serde(default)]
    pub audit: Option<AuditConfig>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_fractions(label: &str, fractions: &[f64], expected: usize) -> CliResult<()> {
    if fractions.len() != expected {
        return Err(invalid(format!("{label} needs {expected} fractions, got {}", fractions.len())));
    }
    if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(invalid(format!("{label} fractions must lie in (0,1)")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{label} fractions sum to {total}, not 1")));
    }
    Ok(())
}

fn check_coverage(label: &str, alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{label} {alpha} outside (0,1]")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.datasets.is_empty() {
            return Err(invalid("no datasets configured"));
        }
        let mut names: Vec<&str> = Vec::new();
        for ds in &self.datasets {
            let name = ds.name();
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(invalid(format!("dataset name `{name}` is not a plain file name")));
            }
            if names.contains(&name) {
                return Err(invalid(format!("duplicate dataset name `{name}`")));
            }
            names.push(name);
            match ds {
                DatasetConfig::Synthetic { n, d, .. } if *n < 10 || *d < 1 => {
                    return Err(invalid(format!("synthetic dataset `{name}` needs n >= 10 and d >= 1")));
                }
                DatasetConfig::HousePrices { n, .. } if *n < 10 => {
                    return Err(invalid(format!("house-price dataset `{name}` needs n >= 10")));
                }
                _ => {}
            }
        }
        if self.methods.is_empty() {
            return Err(invalid("no methods configured"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(invalid(format!("method {m} listed twice")));
            }
        }
        self.learner.validate().map_err(|e| invalid(format!("learner: {e}")))?;
        if self.learner.is_classifier() {
            return Err(invalid("the base learner must be a regressor"));
        }
        if let Some(spec) = &self.residual_learner {
            spec.validate().map_err(|e| invalid(format!("residual_learner: {e}")))?;
            if spec.is_classifier() {
                return Err(invalid("the residual learner must be a regressor"));
            }
        }
        if self.coverages.is_empty() {
            return Err(invalid("empty coverage grid"));
        }
        for &alpha in &self.coverages {
            check_coverage("target coverage", alpha)?;
        }
        for (i, a) in self.coverages.iter().enumerate() {
            if self.coverages[..i].contains(a) {
                return Err(invalid(format!("coverage {a} listed twice")));
            }
        }
        if self.seeds.is_empty() {
            return Err(invalid("no seeds configured"));
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(invalid(format!("seed {s} listed twice")));
            }
        }
        check_fractions("split", &self.split, 3)?;
        if !(self.tolerance >= 0.0 && self.tolerance < 1.0) {
            return Err(invalid(format!("tolerance {} outside [0,1)", self.tolerance)));
        }
        if self.folds < 2 {
            return Err(invalid("folds must be >= 2"));
        }
        if matches!(self.bootstraps, Some(b) if b < 2) {
            return Err(invalid("bootstraps must be >= 2"));
        }
        if !(self.conformal_level > 0.0 && self.conformal_level < 1.0) {
            return Err(invalid(format!("conformal_level {} outside (0,1)", self.conformal_level)));
        }
        let [lo, hi] = self.interval_quantiles;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(invalid("interval_quantiles must satisfy 0 < lo < hi < 1"));
        }
        if self.set_cap < 1 {
            return Err(invalid("set_cap must be >= 1"));
        }
        if let Some(audit) = &self.audit {
            audit.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// The configuration as stored in manifests: everything that determines
    /// the outputs, without where they were written.
    pub fn canonical(&self) -> Self {
        Self {
            output_dir: None,
            ..self.clone()
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.method == Method::Goldcase {
            return Err(invalid("the audited method must not need test labels"));
        }
        check_coverage("audit target_coverage", self.target_coverage)?;
        self.audit_learner.validate().map_err(|e| invalid(format!("audit_learner: {e}")))?;
        check_fractions("audit split", &self.split, 4)?;
        if !self.noise_mean.is_finite() || !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(invalid("noise_mean must be finite and noise_sd >= 0"));
        }
        if self.repeats < 1 {
            return Err(invalid("repeats must be >= 1"));
        }
        if self.background_size < 1 {
            return Err(invalid("background_size must be >= 1"));
        }
        if matches!(self.shapley, ShapleyMode::Permutation { samples: 0 }) {
            return Err(invalid("permutation Shapley needs at least one sample"));
        }
        if let Some(joint) = &self.joint_shift {
            if joint.is_empty() {
                return Err(invalid("joint_shift must name at least one feature"));
            }
        }
        Ok(())
    }
}
