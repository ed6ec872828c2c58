//! Evaluation of selective models: empirical coverage, coverage
//! satisfaction, relative MSE change, risk-coverage curves and rank
//! comparison across datasets.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::selective::{accepts, Method, SelectiveModel, SelectivePrediction};
use crate::stats;

/// Slack allowed below the target coverage before a method counts as
/// violating it.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// Target coverages of the benchmark, highest first.
pub const BENCHMARK_COVERAGES: [f64; 11] = [0.99, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.65, 0.60, 0.55, 0.50];

/// Full coverage followed by [`BENCHMARK_COVERAGES`].
pub fn default_coverage_grid() -> Vec<f64> {
    std::iter::once(1.0).chain(BENCHMARK_COVERAGES).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub target_coverage: f64,
    pub actual_coverage: f64,
    pub n_accepted: usize,
    pub n_total: usize,
    pub mse_full: f64,
    /// `None` when no row was accepted.
    pub mse_accepted: Option<f64>,
    /// `mse_accepted / mse_full − 1`, or exactly 0 when `cov_ok` is false.
    pub delta_mse: f64,
    pub cov_ok: bool,
}

pub fn coverage(preds: &[SelectivePrediction]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::InvalidParameter("coverage of an empty prediction list".into()));
    }
    Ok(preds.iter().filter(|p| p.accepted).count() as f64 / preds.len() as f64)
}

/// Rounding slack so that a shortfall equal to the tolerance in decimal
/// terms (0.90 vs 0.85) is a violation regardless of binary representation.
const BOUNDARY_SLACK: f64 = 1e-12;

/// True when the shortfall `alpha − actual` is strictly below `tolerance`.
pub fn cov_sat(alpha: f64, actual: f64, tolerance: f64) -> bool {
    alpha - actual < tolerance - BOUNDARY_SLACK
}

/// Scores one selection against the labels. `full_predictions` are the
/// predictor's values on every row, accepted or not.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_selection(
    method: Method,
    seed: u64,
    full_predictions: &[f64],
    accepted: &[bool],
    y: &[f64],
    alpha: f64,
    tolerance: f64,
) -> Result<EvaluationRecord> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidParameter("evaluation on zero rows".into()));
    }
    for len in [full_predictions.len(), accepted.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let mut sum_full = 0.0;
    let mut sum_acc = 0.0;
    let mut n_accepted = 0;
    for ((p, t), &a) in full_predictions.iter().zip(y).zip(accepted) {
        let sq = (t - p) * (t - p);
        sum_full += sq;
        if a {
            sum_acc += sq;
            n_accepted += 1;
        }
    }
    let mse_full = sum_full / n as f64;
    if !mse_full.is_finite() {
        return Err(Error::NonFinite("predictions"));
    }
    if mse_full == 0.0 {
        return Err(Error::DegeneratePredictor);
    }
    let actual = n_accepted as f64 / n as f64;
    let mse_accepted = (n_accepted > 0).then(|| sum_acc / n_accepted as f64);
    let cov_ok = cov_sat(alpha, actual, tolerance);
    let delta_mse = match (cov_ok, mse_accepted) {
        (true, Some(m)) => m / mse_full - 1.0,
        _ => 0.0,
    };
    Ok(EvaluationRecord {
        dataset: String::new(),
        method,
        seed,
        target_coverage: alpha,
        actual_coverage: actual,
        n_accepted,
        n_total: n,
        mse_full,
        mse_accepted,
        delta_mse,
        cov_ok,
    })
}

/// [`evaluate_selection`] on the output of `predict_selective`.
pub fn delta_mse(
    method: Method,
    preds: &[SelectivePrediction],
    full_predictions: &[f64],
    y: &[f64],
    alpha: f64,
    tolerance: f64,
) -> Result<EvaluationRecord> {
    let accepted: Vec<bool> = preds.iter().map(|p| p.accepted).collect();
    evaluate_selection(method, 0, full_predictions, &accepted, y, alpha, tolerance)
}

/// One record per target coverage. Scores are computed once and the
/// threshold is re-derived from the model's calibration scores for each
/// coverage.
pub fn risk_coverage_curve(
    model: &SelectiveModel,
    x_test: ArrayView2<f64>,
    y_test: &[f64],
    grid: &[f64],
    tolerance: f64,
    seed: u64,
) -> Result<Vec<EvaluationRecord>> {
    let scored = model.score_batch(x_test, Some(y_test))?;
    grid.iter()
        .map(|&alpha| {
            let tau = model.threshold_for(alpha)?;
            let accepted: Vec<bool> = scored.scores.iter().map(|&s| accepts(s, tau)).collect();
            evaluate_selection(model.method, seed, &scored.predictions, &accepted, y_test, alpha, tolerance)
        })
        .collect()
}

/// Upper 5% critical values of the studentized range divided by √2, indexed
/// by the number of compared methods k = 2..=10.
const NEMENYI_Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

pub fn nemenyi_q(k: usize) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "Nemenyi critical values are tabulated for 2..=10 methods, got {k}"
        )));
    }
    Ok(NEMENYI_Q_005[k - 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub methods: Vec<String>,
    /// Mean rank per method; 1 is best (lowest ΔMSE).
    pub mean_ranks: Vec<f64>,
    pub critical_difference: f64,
    pub n_datasets: usize,
    pub n_methods: usize,
    pub friedman_statistic: f64,
    pub friedman_p_value: f64,
    /// Pairs whose mean ranks differ by less than the critical difference.
    pub not_separated: Vec<(String, String)>,
}

/// Friedman ranks with the Nemenyi critical difference at the 5% level.
/// `table[i][j]` is method j's ΔMSE on dataset i; NaN marks a missing cell.
pub fn friedman_nemenyi(table: &[Vec<f64>], methods: &[String]) -> Result<RankSummary> {
    let n = table.len();
    let k = methods.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 datasets, got {n}")));
    }
    let q = nemenyi_q(k)?;
    let mut rank_sums = vec![0.0; k];
    for (i, row) in table.iter().enumerate() {
        if row.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: row.len() });
        }
        if let Some(j) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::MissingCell(format!("dataset {i}, method {}", methods[j])));
        }
        for (sum, r) in rank_sums.iter_mut().zip(stats::average_ranks(row)) {
            *sum += r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / nf).collect();
    let critical_difference = q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let friedman_statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let friedman_p_value = chi.sf(friedman_statistic);
    let mut not_separated = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            if (mean_ranks[a] - mean_ranks[b]).abs() < critical_difference {
                not_separated.push((methods[a].clone(), methods[b].clone()));
            }
        }
    }
    Ok(RankSummary {
        methods: methods.to_vec(),
        mean_ranks,
        critical_difference,
        n_datasets: n,
        n_methods: k,
        friedman_statistic,
        friedman_p_value,
        not_separated,
    })
}

/// Mean and sample standard deviation (n − 1 denominator) over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sample_sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: stats::mean(values),
            sample_sd: stats::sample_sd(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    /// One cell per entry of the table's `coverages`.
    pub cells: Vec<Option<MeanSd>>,
}

/// Per-dataset results laid out as a coverage block and a ΔMSE block, each
/// with one row per method and one column per target coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub dataset: String,
    pub coverages: Vec<f64>,
    pub n_seeds: usize,
    pub coverage_block: Vec<MethodRow>,
    pub delta_mse_block: Vec<MethodRow>,
    /// Fraction of seeds meeting the coverage constraint.
    pub cov_ok_rate: Vec<MethodRow>,
}

fn coverage_key(alpha: f64) -> u64 {
    (alpha * 1e6).round() as u64
}

/// Aggregates the records of one dataset over seeds.
pub fn result_table(dataset: &str, records: &[EvaluationRecord]) -> ResultTable {
    let mut coverages: Vec<f64> = Vec::new();
    for r in records {
        if !coverages.iter().any(|&c| coverage_key(c) == coverage_key(r.target_coverage)) {
            coverages.push(r.target_coverage);
        }
    }
    coverages.sort_by(|a, b| b.total_cmp(a));
    let mut groups: BTreeMap<(Method, u64), Vec<&EvaluationRecord>> = BTreeMap::new();
    let mut seeds = Vec::new();
    for r in records {
        groups.entry((r.method, coverage_key(r.target_coverage))).or_default().push(r);
        if !seeds.contains(&r.seed) {
            seeds.push(r.seed);
        }
    }
    let mut methods: Vec<Method> = groups.keys().map(|(m, _)| *m).collect();
    methods.dedup();
    let block = |f: &dyn Fn(&EvaluationRecord) -> f64| -> Vec<MethodRow> {
        methods
            .iter()
            .map(|&method| MethodRow {
                method,
                cells: coverages
                    .iter()
                    .map(|&c| {
                        groups.get(&(method, coverage_key(c))).map(|rs| {
                            let values: Vec<f64> = rs.iter().map(|r| f(r)).collect();
                            MeanSd::of(&values)
                        })
                    })
                    .collect(),
            })
            .collect()
    };
    ResultTable {
        dataset: dataset.to_string(),
        n_seeds: seeds.len(),
        coverage_block: block(&|r| r.actual_coverage),
        delta_mse_block: block(&|r| r.delta_mse),
        cov_ok_rate: block(&|r| if r.cov_ok { 1.0 } else { 0.0 }),
        coverages,
    }
}

pub fn write_evaluations_csv<W: Write>(records: &[EvaluationRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_evaluations_csv<R: std::io::Read>(reader: R) -> Result<Vec<EvaluationRecord>> {
    csv::Reader::from_reader(reader)
        .into_deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
