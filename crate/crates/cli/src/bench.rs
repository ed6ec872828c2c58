//! The benchmark grid: every (dataset, seed) cell fits and calibrates each
//! configured method and evaluates it on the test split at every target
//! coverage.

use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use selreg::dataset::{preprocess, split_rows, Dataset, RawDataset};
use selreg::learners::FittedModel;
use selreg::metrics::{friedman_nemenyi, result_table, risk_coverage_curve, write_evaluations_csv, EvaluationRecord, RankSummary, ResultTable};
use selreg::selective::{
    build, build_goldcase, build_plugin_with, build_scross_with, fit_predictor, from_ensemble, Method, SelectiveModel, SelectiveOptions,
};
use selreg::uncertainty::{fit_ensemble_with, BootstrapEnsemble, EnsembleOptions};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data;
use crate::error::{CliError, CliResult};
use crate::output::{self, CellStatus, Command, Failure, Manifest};

pub const EVALUATIONS_FILE: &str = "evaluations.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RANKS_JSON: &str = "ranks.json";
pub const RANKS_CSV: &str = "ranks.csv";

/// Friedman/Nemenyi comparison at one target coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRanks {
    pub target_coverage: f64,
    /// Absent when fewer than two datasets or methods are comparable.
    pub summary: Option<RankSummary>,
    /// Datasets left out because some method has no record there.
    pub excluded_datasets: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub records: Vec<EvaluationRecord>,
    pub tables: Vec<ResultTable>,
    pub ranks: Vec<LevelRanks>,
    pub cells: Vec<CellStatus>,
}

impl BenchOutcome {
    pub fn n_failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.failures.is_empty()).count()
    }
}

pub fn selective_options(config: &ExperimentConfig) -> SelectiveOptions {
    SelectiveOptions {
        folds: config.folds,
        conformal_level: config.conformal_level,
        interval_quantiles: (config.interval_quantiles[0], config.interval_quantiles[1]),
        ensemble: EnsembleOptions {
            bootstraps: config.bootstraps,
            set_cap: config.set_cap,
        },
        residual_learner: config.residual_learner.clone(),
    }
}

pub fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
}

/// Loads every dataset once; a load failure is carried to each of its cells.
pub fn load_datasets(config: &ExperimentConfig) -> Vec<Result<RawDataset, String>> {
    config.datasets.iter().map(|ds| data::load(ds).map_err(|e| e.to_string())).collect()
}

pub struct Splits {
    pub train: Dataset,
    pub calibration: Dataset,
    pub test: Dataset,
}

/// Splits a cell's rows and fits preprocessing on the training split.
pub fn prepare(raw: &RawDataset, fractions: &[f64], seed: u64) -> selreg::Result<Splits> {
    let plan = split_rows(
        raw.n(),
        &[("train", fractions[0]), ("calibration", fractions[1]), ("test", fractions[2])],
        seed,
    )?;
    let (data, _) = preprocess(raw, &plan.rows_of(0))?;
    Ok(Splits {
        train: data.subset(&plan.rows_of(0)),
        calibration: data.subset(&plan.rows_of(1)),
        test: data.subset(&plan.rows_of(2)),
    })
}

/// Fits shared pieces at most once per cell.
struct CellFits<'a> {
    config: &'a ExperimentConfig,
    options: SelectiveOptions,
    splits: &'a Splits,
    seed: u64,
    predictor: Option<Result<FittedModel, String>>,
    ensemble: Option<Result<BootstrapEnsemble, String>>,
}

impl CellFits<'_> {
    fn train(&self) -> (ArrayView2<'_, f64>, &[f64]) {
        (self.splits.train.features.view(), &self.splits.train.target)
    }

    fn predictor(&mut self) -> Result<FittedModel, String> {
        if self.predictor.is_none() {
            let (x, y) = self.train();
            self.predictor = Some(fit_predictor(&self.config.learner, x, y, self.seed).map_err(|e| e.to_string()));
        }
        self.predictor.clone().expect("set above")
    }

    fn ensemble(&mut self) -> Result<BootstrapEnsemble, String> {
        if self.ensemble.is_none() {
            let (x, y) = self.train();
            self.ensemble =
                Some(fit_ensemble_with(&self.config.learner, x, y, self.options.ensemble, self.seed).map_err(|e| e.to_string()));
        }
        self.ensemble.clone().expect("set above")
    }

    fn model(&mut self, method: Method) -> Result<SelectiveModel, String> {
        let spec = &self.config.learner;
        let alpha = self.config.coverages[0];
        let x_cal = self.splits.calibration.features.view();
        let (x, y) = (self.splits.train.features.view(), self.splits.train.target.as_slice());
        let text = |e: selreg::Error| e.to_string();
        match method {
            Method::DoubtVar | Method::DoubtInt => {
                let ensemble = self.ensemble()?;
                from_ensemble(method, ensemble, x_cal, alpha, &self.options).map_err(text)
            }
            Method::Plugin => {
                let p = self.predictor()?;
                build_plugin_with(p, spec, x, y, x_cal, alpha, &self.options, self.seed).map_err(text)
            }
            Method::Scross => {
                let p = self.predictor()?;
                build_scross_with(p, spec, x, y, x_cal, alpha, &self.options, self.seed).map_err(text)
            }
            Method::Cvplus => build(method, spec, x, y, x_cal, alpha, &self.options, self.seed).map_err(text),
            Method::Goldcase => {
                let p = self.predictor()?;
                let test = &self.splits.test;
                build_goldcase(p, test.features.view(), &test.target, alpha).map_err(text)
            }
        }
    }
}

/// Runs one cell. Method failures are isolated from each other.
pub fn run_cell(config: &ExperimentConfig, dataset: &str, raw: &RawDataset, seed: u64) -> (Vec<EvaluationRecord>, CellStatus) {
    let splits = match prepare(raw, &config.split, seed) {
        Ok(s) => s,
        Err(e) => {
            let failure = Failure {
                method: None,
                error: e.to_string(),
            };
            return (Vec::new(), CellStatus::new(dataset, seed, vec![failure], 0));
        }
    };
    let mut fits = CellFits {
        config,
        options: selective_options(config),
        splits: &splits,
        seed,
        predictor: None,
        ensemble: None,
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut succeeded = 0;
    for &method in &config.methods {
        let curve = fits.model(method).and_then(|model| {
            risk_coverage_curve(&model, splits.test.features.view(), &splits.test.target, &config.coverages, config.tolerance, seed)
                .map_err(|e| e.to_string())
        });
        match curve {
            Ok(curve) => {
                succeeded += 1;
                records.extend(curve.into_iter().map(|r| EvaluationRecord {
                    dataset: dataset.to_string(),
                    ..r
                }));
            }
            Err(error) => failures.push(Failure {
                method: Some(method.tag().to_string()),
                error,
            }),
        }
    }
    (records, CellStatus::new(dataset, seed, failures, succeeded))
}

/// Friedman/Nemenyi per target coverage below 1 on mean ΔMSE over seeds.
/// GoldCase is an oracle and does not take part.
pub fn rank_levels(config: &ExperimentConfig, records: &[EvaluationRecord]) -> Vec<LevelRanks> {
    let methods: Vec<Method> = config.methods.iter().copied().filter(|&m| m != Method::Goldcase).collect();
    let names: Vec<String> = methods.iter().map(|m| m.display_name().to_string()).collect();
    config
        .coverages
        .iter()
        .filter(|&&alpha| alpha < 1.0)
        .map(|&alpha| {
            let mut table = Vec::new();
            let mut excluded = Vec::new();
            for ds in &config.datasets {
                let row: Vec<f64> = methods
                    .iter()
                    .map(|&m| {
                        let values: Vec<f64> = records
                            .iter()
                            .filter(|r| r.dataset == ds.name() && r.method == m && r.target_coverage == alpha)
                            .map(|r| r.delta_mse)
                            .collect();
                        if values.is_empty() {
                            f64::NAN
                        } else {
                            values.iter().sum::<f64>() / values.len() as f64
                        }
                    })
                    .collect();
                if row.iter().any(|v| v.is_nan()) {
                    excluded.push(ds.name().to_string());
                } else {
                    table.push(row);
                }
            }
            let summary = if table.len() >= 2 && methods.len() >= 2 {
                friedman_nemenyi(&table, &names).ok()
            } else {
                None
            };
            LevelRanks {
                target_coverage: alpha,
                summary,
                excluded_datasets: excluded,
            }
        })
        .collect()
}

/// Runs the whole grid on `jobs` threads. Results are ordered by dataset,
/// seed, method and coverage regardless of the thread count.
pub fn run_bench(config: &ExperimentConfig, jobs: usize) -> CliResult<BenchOutcome> {
    config.validate()?;
    let datasets = load_datasets(config);
    let cells: Vec<(usize, u64)> = (0..config.datasets.len())
        .flat_map(|d| config.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let pool = thread_pool(jobs)?;
    let results: Vec<(Vec<EvaluationRecord>, CellStatus)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, seed)| {
                let name = config.datasets[d].name();
                match &datasets[d] {
                    Ok(raw) => run_cell(config, name, raw, seed),
                    Err(e) => {
                        let failure = Failure {
                            method: None,
                            error: e.clone(),
                        };
                        (Vec::new(), CellStatus::new(name, seed, vec![failure], 0))
                    }
                }
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut statuses = Vec::new();
    for (r, s) in results {
        records.extend(r);
        statuses.push(s);
    }
    let tables = config
        .datasets
        .iter()
        .filter_map(|ds| {
            let subset: Vec<EvaluationRecord> = records.iter().filter(|r| r.dataset == ds.name()).cloned().collect();
            (!subset.is_empty()).then(|| result_table(ds.name(), &subset))
        })
        .collect();
    let ranks = rank_levels(config, &records);
    Ok(BenchOutcome {
        records,
        tables,
        ranks,
        cells: statuses,
    })
}

#[derive(Serialize)]
struct RankCsvRow<'a> {
    target_coverage: f64,
    method: &'a str,
    mean_rank: f64,
    critical_difference: f64,
    n_datasets: usize,
    friedman_p_value: f64,
}

pub fn write_bench(outcome: &BenchOutcome, config: &ExperimentConfig, out: &Path) -> CliResult<Manifest> {
    output::create_dir(out)?;
    let eval_path = out.join(EVALUATIONS_FILE);
    let file = output::create(&eval_path)?;
    write_evaluations_csv(&outcome.records, file)?;
    output::write_json(&out.join(SUMMARY_FILE), &outcome.tables)?;
    let mut outputs = vec![EVALUATIONS_FILE.to_string(), SUMMARY_FILE.to_string()];
    if config.datasets.len() >= 2 {
        output::write_json(&out.join(RANKS_JSON), &outcome.ranks)?;
        let rows: Vec<RankCsvRow> = outcome
            .ranks
            .iter()
            .filter_map(|level| level.summary.as_ref().map(|s| (level.target_coverage, s)))
            .flat_map(|(alpha, s)| {
                s.methods.iter().zip(&s.mean_ranks).map(move |(m, &rank)| RankCsvRow {
                    target_coverage: alpha,
                    method: m,
                    mean_rank: rank,
                    critical_difference: s.critical_difference,
                    n_datasets: s.n_datasets,
                    friedman_p_value: s.friedman_p_value,
                })
            })
            .collect();
        output::write_csv_rows(&out.join(RANKS_CSV), &rows)?;
        outputs.push(RANKS_JSON.to_string());
        outputs.push(RANKS_CSV.to_string());
    }
    let manifest = Manifest::new(Command::Bench, config, outcome.cells.clone(), outputs);
    output::write_json(&out.join(output::MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
