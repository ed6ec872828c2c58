//! The rejection audit: fit a selective model on train/calibration, train
//! an audit classifier on its validation decisions, explain the accepted
//! test rows with Shapley values and measure how the explanations move
//! under feature shifts.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use selreg::dataset::{add_random_feature, preprocess, split_rows, ColumnTransform, Dataset, PreprocessRecord, RawDataset};
use selreg::explain::{
    beeswarm, fit_audit, sample_background, shift_audit, univariate_scenarios, write_shapley_csv, write_shift_csv,
    write_shift_details_csv, AuditModel, BeeswarmFeature, ShapleyAttribution, ShiftOptions, ShiftReport, ShiftScenario,
};
use selreg::rng::{derive_seed, stream};
use selreg::selective::{build, SelectiveModel};
use selreg::stats;
use serde::{Deserialize, Serialize};

use crate::bench::{load_datasets, selective_options, thread_pool};
use crate::config::{AuditConfig, ExperimentConfig, ShiftSpace};
use crate::error::{CliError, CliResult};
use crate::output::{self, CellStatus, Command, Failure, Manifest};

pub const SUMMARY_FILE: &str = "audit_summary.csv";
pub const RANDOM_FEATURE: &str = "X_Random";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub dataset: String,
    pub seed: u64,
    pub method: String,
    pub target_coverage: f64,
    pub validation_acceptance: f64,
    pub test_acceptance: f64,
    pub training_auc: f64,
    /// AUC of the audit model for the test-split decisions; empty when every
    /// test row was accepted or every one rejected.
    pub test_auc: Option<f64>,
    pub n_explained: usize,
    /// Feature with the largest absolute correlation with the target on the
    /// training split, random feature excluded.
    pub most_predictive_feature: String,
    pub most_predictive_distance: Option<f64>,
    pub random_feature_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AuditResult {
    pub summary: AuditSummary,
    pub audit: AuditModel,
    pub shapley: ShapleyAttribution,
    pub beeswarm: Vec<BeeswarmFeature>,
    pub shift: ShiftReport,
}

#[derive(Debug, Clone)]
pub struct AuditCell {
    pub dataset: String,
    pub seed: u64,
    pub result: Result<AuditResult, String>,
}

/// Multiplier turning a unit of raw feature into a unit of the scaled one.
fn raw_scales(record: &PreprocessRecord, d: usize) -> Vec<f64> {
    let inv = |min: f64, max: f64| if max > min { 1.0 / (max - min) } else { 1.0 };
    let mut scales: Vec<f64> = record
        .transforms
        .iter()
        .flat_map(|t| match t {
            ColumnTransform::Numeric { min, max, .. } => vec![inv(*min, *max)],
            ColumnTransform::OneHot { mins, maxs, .. } => mins.iter().zip(maxs).map(|(a, b)| inv(*a, *b)).collect(),
        })
        .collect();
    scales.resize(d, 1.0);
    scales
}

fn accepted_flags(model: &SelectiveModel, data: &Dataset) -> selreg::Result<Vec<bool>> {
    Ok(model.predict_selective(data.features.view())?.iter().map(|p| p.accepted).collect())
}

fn fraction(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&a| a).count() as f64 / flags.len() as f64
}

pub fn scenarios_for(audit: &AuditConfig, names: &[String]) -> Vec<ShiftScenario> {
    let mut scenarios = univariate_scenarios(audit.shift_features.as_deref().unwrap_or(names));
    if let Some(joint) = &audit.joint_shift {
        scenarios.push(ShiftScenario::joint(joint));
    }
    scenarios
}

pub fn run_audit_cell(config: &ExperimentConfig, audit_cfg: &AuditConfig, dataset: &str, raw: &RawDataset, seed: u64) -> selreg::Result<AuditResult> {
    let f = &audit_cfg.split;
    let plan = split_rows(
        raw.n(),
        &[("train", f[0]), ("calibration", f[1]), ("validation", f[2]), ("test", f[3])],
        seed,
    )?;
    let (mut data, record) = preprocess(raw, &plan.rows_of(0))?;
    if audit_cfg.add_random_feature {
        data = add_random_feature(&data, seed);
    }
    let names = data.feature_names();
    let part = |k: usize| data.subset(&plan.rows_of(k));
    let (train, calibration, validation, test) = (part(0), part(1), part(2), part(3));

    let selective = build(
        audit_cfg.method,
        &config.learner,
        train.features.view(),
        &train.target,
        calibration.features.view(),
        audit_cfg.target_coverage,
        &selective_options(config),
        seed,
    )?;
    let val_flags = accepted_flags(&selective, &validation)?;
    let audit = fit_audit(
        validation.features.view(),
        &val_flags,
        &names,
        &audit_cfg.audit_learner,
        audit_cfg.output,
        derive_seed(seed, stream::LEARNER),
    )?;
    let test_flags = accepted_flags(&selective, &test)?;
    let test_auc = audit.auc(test.features.view(), &test_flags).ok();

    let kept: Vec<usize> = (0..test.n()).filter(|&i| test_flags[i]).collect();
    let accepted = test.subset(&kept);
    let background = sample_background(validation.features.view(), audit_cfg.background_size, seed);
    let scenarios = scenarios_for(audit_cfg, &names);
    let options = ShiftOptions {
        noise_mean: audit_cfg.noise_mean,
        noise_sd: audit_cfg.noise_sd,
        repeats: audit_cfg.repeats,
        mode: audit_cfg.shapley,
        feature_scales: (audit_cfg.shift_space == ShiftSpace::Raw).then(|| raw_scales(&record, data.d())),
    };
    let shift = shift_audit(&selective, &audit, &accepted, background.view(), &scenarios, &options, seed)?;
    let shapley = audit.shapley(
        accepted.features.view(),
        background.view(),
        audit_cfg.shapley,
        derive_seed(seed, stream::SHAPLEY),
    )?;
    let swarm = beeswarm(&shapley, accepted.features.view())?;

    let most_predictive_feature = names
        .iter()
        .enumerate()
        .filter(|(_, n)| !(audit_cfg.add_random_feature && n.as_str() == RANDOM_FEATURE))
        .map(|(j, n)| (n, stats::pearson(&train.features.column(j).to_vec(), &train.target).abs()))
        .filter(|(_, c)| c.is_finite())
        .fold((String::new(), f64::NEG_INFINITY), |best, (n, c)| if c > best.1 { (n.clone(), c) } else { best })
        .0;
    let summary = AuditSummary {
        dataset: dataset.to_string(),
        seed,
        method: audit_cfg.method.tag().to_string(),
        target_coverage: audit_cfg.target_coverage,
        validation_acceptance: fraction(&val_flags),
        test_acceptance: fraction(&test_flags),
        training_auc: audit.training_auc,
        test_auc,
        n_explained: accepted.n(),
        most_predictive_distance: shift.row(&most_predictive_feature).map(|r| r.mean_distance),
        random_feature_distance: shift.row(RANDOM_FEATURE).map(|r| r.mean_distance),
        most_predictive_feature,
    };
    Ok(AuditResult {
        summary,
        audit,
        shapley,
        beeswarm: swarm,
        shift,
    })
}

pub fn run_audit(config: &ExperimentConfig, jobs: usize) -> CliResult<Vec<AuditCell>> {
    config.validate()?;
    let audit_cfg = config
        .audit
        .as_ref()
        .ok_or_else(|| CliError::Validation("the audit command needs an `audit` block".into()))?;
    let datasets = load_datasets(config);
    let cells: Vec<(usize, u64)> = (0..config.datasets.len())
        .flat_map(|d| config.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let pool = thread_pool(jobs)?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, seed)| {
                let name = config.datasets[d].name();
                let result = match &datasets[d] {
                    Ok(raw) => run_audit_cell(config, audit_cfg, name, raw, seed).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                };
                AuditCell {
                    dataset: name.to_string(),
                    seed,
                    result,
                }
            })
            .collect()
    }))
}

pub fn cell_dir(dataset: &str, seed: u64) -> PathBuf {
    Path::new("audit").join(dataset).join(format!("seed-{seed}"))
}

#[derive(Serialize)]
struct CellReport<'a> {
    summary: &'a AuditSummary,
    audit_model: &'a AuditModel,
    shift: &'a ShiftReport,
}

pub fn write_audit(cells: &[AuditCell], config: &ExperimentConfig, out: &Path) -> CliResult<Manifest> {
    output::create_dir(out)?;
    let mut outputs = Vec::new();
    let mut statuses = Vec::new();
    let mut summaries = Vec::new();
    for cell in cells {
        match &cell.result {
            Ok(result) => {
                let rel = cell_dir(&cell.dataset, cell.seed);
                let dir = out.join(&rel);
                output::create_dir(&dir)?;
                let files: [(&str, &dyn Fn(&Path) -> CliResult<()>); 5] = [
                    ("shapley.csv", &|p| {
                        let w = output::create(p)?;
                        Ok(write_shapley_csv(&result.shapley, w)?)
                    }),
                    ("shift.csv", &|p| {
                        let w = output::create(p)?;
                        Ok(write_shift_csv(&result.shift, w)?)
                    }),
                    ("shift_details.csv", &|p| {
                        let w = output::create(p)?;
                        Ok(write_shift_details_csv(&result.shift, w)?)
                    }),
                    ("beeswarm.json", &|p| output::write_json(p, &result.beeswarm)),
                    ("audit.json", &|p| {
                        output::write_json(
                            p,
                            &CellReport {
                                summary: &result.summary,
                                audit_model: &result.audit,
                                shift: &result.shift,
                            },
                        )
                    }),
                ];
                for (name, write) in files {
                    write(&dir.join(name))?;
                    outputs.push(rel.join(name).to_string_lossy().into_owned());
                }
                summaries.push(result.summary.clone());
                statuses.push(CellStatus::new(&cell.dataset, cell.seed, Vec::new(), 1));
            }
            Err(error) => {
                let failure = Failure {
                    method: Some(config.audit.as_ref().map_or("", |a| a.method.tag()).to_string()),
                    error: error.clone(),
                };
                statuses.push(CellStatus::new(&cell.dataset, cell.seed, vec![failure], 0));
            }
        }
    }
    output::write_csv_rows(&out.join(SUMMARY_FILE), &summaries)?;
    outputs.insert(0, SUMMARY_FILE.to_string());
    let manifest = Manifest::new(Command::Audit, config, statuses, outputs);
    output::write_json(&out.join(output::MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
