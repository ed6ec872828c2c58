//! Plain-text and CSV summaries of a finished run directory.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use selreg::metrics::{read_evaluations_csv, EvaluationRecord, MeanSd};
use selreg::selective::Method;
use serde::Serialize;

use crate::audit::{self, AuditSummary};
use crate::bench::{self, LevelRanks};
use crate::error::{CliError, CliResult};
use crate::output::{self, CellState, Command, Manifest};

pub const REPORT_FILE: &str = "report.txt";
pub const SATISFACTION_FILE: &str = "coverage_satisfaction.csv";
pub const DELTA_FILE: &str = "delta_mse_by_coverage.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatisfactionRow {
    pub method: String,
    /// Evaluations below full coverage.
    pub cells: usize,
    pub satisfied: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub method: String,
    pub target_coverage: f64,
    pub n: usize,
    pub mean_actual_coverage: f64,
    pub mean_delta_mse: f64,
    pub sample_sd_delta_mse: f64,
    pub cov_ok_rate: f64,
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn method_order(manifest: &Manifest, records: &[EvaluationRecord]) -> Vec<Method> {
    manifest
        .config
        .methods
        .iter()
        .copied()
        .filter(|m| records.iter().any(|r| r.method == *m))
        .collect()
}

pub fn satisfaction(methods: &[Method], records: &[EvaluationRecord]) -> Vec<SatisfactionRow> {
    methods
        .iter()
        .map(|&m| {
            let cells: Vec<&EvaluationRecord> = records.iter().filter(|r| r.method == m && r.target_coverage < 1.0).collect();
            let satisfied = cells.iter().filter(|r| r.cov_ok).count();
            SatisfactionRow {
                method: m.display_name().to_string(),
                cells: cells.len(),
                satisfied,
                rate: (!cells.is_empty()).then(|| satisfied as f64 / cells.len() as f64),
            }
        })
        .collect()
}

pub fn delta_by_coverage(methods: &[Method], coverages: &[f64], records: &[EvaluationRecord]) -> Vec<DeltaRow> {
    let mut rows = Vec::new();
    for &m in methods {
        for &alpha in coverages {
            let cell: Vec<&EvaluationRecord> = records.iter().filter(|r| r.method == m && r.target_coverage == alpha).collect();
            if cell.is_empty() {
                continue;
            }
            let n = cell.len();
            let deltas: Vec<f64> = cell.iter().map(|r| r.delta_mse).collect();
            let spread = MeanSd::of(&deltas);
            rows.push(DeltaRow {
                method: m.display_name().to_string(),
                target_coverage: alpha,
                n,
                mean_actual_coverage: cell.iter().map(|r| r.actual_coverage).sum::<f64>() / n as f64,
                mean_delta_mse: spread.mean,
                sample_sd_delta_mse: spread.sample_sd,
                cov_ok_rate: cell.iter().filter(|r| r.cov_ok).count() as f64 / n as f64,
            });
        }
    }
    rows
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

fn header(text: &mut String, manifest: &Manifest) {
    let failed = manifest.cells.iter().filter(|c| c.state == CellState::Failed).count();
    let partial = manifest.cells.iter().filter(|c| c.state == CellState::Partial).count();
    writeln!(text, "tool version: {}", manifest.tool_version).unwrap();
    writeln!(text, "config sha256: {}", manifest.config_hash).unwrap();
    let seeds: Vec<String> = manifest.seeds.iter().map(u64::to_string).collect();
    writeln!(text, "seeds: {}", seeds.join(", ")).unwrap();
    writeln!(text, "cells: {} total, {} partial, {} failed", manifest.cells.len(), partial, failed).unwrap();
    for cell in manifest.cells.iter().filter(|c| c.state != CellState::Ok) {
        for f in &cell.failures {
            let method = f.method.as_deref().unwrap_or("all methods");
            writeln!(text, "  {} seed {} [{}]: {}", cell.dataset, cell.seed, method, f.error).unwrap();
        }
    }
    text.push('\n');
}

fn bench_report(dir: &Path, manifest: &Manifest) -> CliResult<Vec<String>> {
    let records = read_evaluations_csv(open(&dir.join(bench::EVALUATIONS_FILE))?)?;
    let methods = method_order(manifest, &records);
    let sat = satisfaction(&methods, &records);
    let delta = delta_by_coverage(&methods, &manifest.config.coverages, &records);
    output::write_csv_rows(&dir.join(SATISFACTION_FILE), &sat)?;
    output::write_csv_rows(&dir.join(DELTA_FILE), &delta)?;

    let mut text = String::new();
    writeln!(text, "Benchmark report").unwrap();
    header(&mut text, manifest);

    writeln!(text, "Coverage satisfaction (cells below full coverage)").unwrap();
    for row in &sat {
        writeln!(text, "  {:<10} {:>4}/{:<4} {}", row.method, row.satisfied, row.cells, opt(row.rate.map(|r| 100.0 * r), 1) + "%").unwrap();
    }
    text.push('\n');

    writeln!(text, "Mean relative MSE change by target coverage").unwrap();
    let coverages = &manifest.config.coverages;
    let mut line = format!("  {:<10}", "coverage");
    for c in coverages {
        write!(line, " {c:>8.2}").unwrap();
    }
    writeln!(text, "{line}").unwrap();
    for &m in &methods {
        let mut line = format!("  {:<10}", m.display_name());
        for &c in coverages {
            let cell = delta.iter().find(|r| r.method == m.display_name() && r.target_coverage == c);
            write!(line, " {:>8}", opt(cell.map(|r| r.mean_delta_mse), 4)).unwrap();
        }
        writeln!(text, "{line}").unwrap();
    }
    text.push('\n');

    let ranks_path = dir.join(bench::RANKS_JSON);
    if ranks_path.exists() {
        let ranks: Vec<LevelRanks> = serde_json::from_reader(open(&ranks_path)?)?;
        writeln!(text, "Mean ranks of mean relative MSE change (lower is better)").unwrap();
        for level in &ranks {
            match &level.summary {
                Some(s) => {
                    writeln!(
                        text,
                        "  coverage {:.2}: CD {:.4}, Friedman p {:.4}, {} datasets",
                        level.target_coverage, s.critical_difference, s.friedman_p_value, s.n_datasets
                    )
                    .unwrap();
                    let mut order: Vec<usize> = (0..s.methods.len()).collect();
                    order.sort_by(|&a, &b| s.mean_ranks[a].total_cmp(&s.mean_ranks[b]));
                    for k in order {
                        writeln!(text, "    {:<10} {:.3}", s.methods[k], s.mean_ranks[k]).unwrap();
                    }
                    if !s.not_separated.is_empty() {
                        let pairs: Vec<String> = s.not_separated.iter().map(|(a, b)| format!("{a}/{b}")).collect();
                        writeln!(text, "    not separated: {}", pairs.join(", ")).unwrap();
                    }
                }
                None => writeln!(text, "  coverage {:.2}: not enough complete datasets", level.target_coverage).unwrap(),
            }
        }
    } else {
        writeln!(text, "Mean ranks: need at least two datasets").unwrap();
    }
    output::write_text(&dir.join(REPORT_FILE), &text)?;
    Ok(vec![REPORT_FILE.into(), SATISFACTION_FILE.into(), DELTA_FILE.into()])
}

fn audit_report(dir: &Path, manifest: &Manifest) -> CliResult<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(open(&dir.join(audit::SUMMARY_FILE))?);
    let rows: Vec<AuditSummary> = rdr.deserialize().collect::<Result<_, _>>()?;
    let mut text = String::new();
    writeln!(text, "Audit report").unwrap();
    writeln!(
        text,
        "Shapley values are interventional: absent features are filled from an empirical background sample, not from their conditional distribution."
    )
    .unwrap();
    header(&mut text, manifest);
    for r in &rows {
        writeln!(text, "{} seed {} ({} at coverage {:.2})", r.dataset, r.seed, r.method, r.target_coverage).unwrap();
        writeln!(
            text,
            "  acceptance: validation {:.3}, test {:.3}; audit AUC: training {:.3}, test {}",
            r.validation_acceptance,
            r.test_acceptance,
            r.training_auc,
            opt(r.test_auc, 3)
        )
        .unwrap();
        writeln!(
            text,
            "  shift distance: {} {}, random feature {}",
            r.most_predictive_feature,
            opt(r.most_predictive_distance, 4),
            opt(r.random_feature_distance, 4)
        )
        .unwrap();
    }
    output::write_text(&dir.join(REPORT_FILE), &text)?;
    Ok(vec![REPORT_FILE.into()])
}

/// Renders the summaries for the run stored in `dir`; returns the files
/// written.
pub fn run_report(dir: &Path) -> CliResult<Vec<String>> {
    let manifest = Manifest::read(dir)?;
    match manifest.command {
        Command::Bench => bench_report(dir, &manifest),
        Command::Audit => audit_report(dir, &manifest),
    }
}
