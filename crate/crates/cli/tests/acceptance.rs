//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use selreg::dataset::{split_rows, synth_heteroscedastic, NoiseProfile};
use selreg::explain::{additive_shapley, shapley, wasserstein_1d, ShapleyMode};
use selreg::learners::{LearnerSpec, TreeParams};
use selreg::metrics::{default_coverage_grid, risk_coverage_curve, EvaluationRecord, BENCHMARK_COVERAGES};
use selreg::rng::rng_from_seed;
use selreg::selective::{
    accepts, build, build_goldcase, build_plugin_with, build_scross_with, calibrate_threshold, cross_fit, fit_predictor, CvPlusModel,
    Method, SelectiveOptions,
};
use selreg_cli::audit::{run_audit_cell, AuditResult, RANDOM_FEATURE};
use selreg_cli::bench::{prepare, run_bench, BenchOutcome};
use selreg_cli::{data, ExperimentConfig};
use serde_json::json;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn config(value: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&value.to_string()).expect("valid acceptance config")
}

// Benchmark grid shared by criteria 1, 2 and 3: 20 synthetic
// heteroscedastic datasets with d cycling through 3..=8 and three noise
// shapes, 5 seeds, the 11 benchmark coverages.

const GRID_DATASETS: usize = 20;
const GRID_SEEDS: u64 = 5;

fn grid_config() -> ExperimentConfig {
    let profiles = [
        json!({"kind": "increasing", "base": 0.1, "slope": 1.0}),
        json!({"kind": "interaction", "base": 0.1, "scale": 1.0}),
        json!({"kind": "increasing", "base": 0.05, "slope": 2.0}),
    ];
    let datasets: Vec<serde_json::Value> = (0..GRID_DATASETS)
        .map(|i| {
            json!({"kind": "synthetic", "name": format!("synth-{i:02}"), "n": 2000, "d": 3 + i % 6,
                   "noise": profiles[i % 3], "seed": 100 + i})
        })
        .collect();
    config(json!({
        "datasets": datasets,
        "methods": ["doubt_var", "doubt_int", "plugin", "scross", "cvplus", "goldcase"],
        "learner": {"kind": "gbt"},
        "coverages": BENCHMARK_COVERAGES,
        "seeds": (0..GRID_SEEDS).collect::<Vec<_>>(),
    }))
}

fn grid() -> &'static (BenchOutcome, Duration) {
    static GRID: OnceLock<(BenchOutcome, Duration)> = OnceLock::new();
    GRID.get_or_init(|| {
        let start = Instant::now();
        let outcome = run_bench(&grid_config(), jobs()).expect("grid runs");
        (outcome, start.elapsed())
    })
}

fn cov_ok_rate(records: &[EvaluationRecord], method: Method) -> (usize, usize) {
    let cells: Vec<&EvaluationRecord> = records.iter().filter(|r| r.method == method).collect();
    (cells.iter().filter(|r| r.cov_ok).count(), cells.len())
}

fn criterion_1() -> Verdict {
    let (outcome, elapsed) = grid();
    let expected = GRID_DATASETS * GRID_SEEDS as usize * BENCHMARK_COVERAGES.len();
    let mut pass = outcome.n_failed_cells() == 0 && elapsed.as_secs() <= 15 * 60;
    let mut parts = Vec::new();
    for (method, bound) in [(Method::DoubtVar, 0.85), (Method::DoubtInt, 0.85), (Method::Scross, 0.85), (Method::Cvplus, 0.95)] {
        let (ok, n) = cov_ok_rate(&outcome.records, method);
        let rate = ok as f64 / n as f64;
        pass &= n == expected && rate >= bound;
        parts.push(format!("{} {:.1}% (>= {:.0}%)", method.display_name(), 100.0 * rate, 100.0 * bound));
    }
    parts.push(format!("grid {:.0}s", elapsed.as_secs_f64()));
    verdict(pass, parts.join(", "))
}

fn criterion_2() -> Verdict {
    let cfg = grid_config();
    let interpolating = LearnerSpec::Tree(TreeParams { max_depth: None, min_samples_leaf: 1 });
    let options = SelectiveOptions::default();
    let (mut plugin_degenerate, mut scross_varied, mut cells) = (0, 0, 0);
    for ds in &cfg.datasets {
        let raw = data::load(ds).expect("synthetic data loads");
        for seed in 0..GRID_SEEDS {
            let s = prepare(&raw, &cfg.split, seed).expect("cell splits");
            let (x, y) = (s.train.features.view(), s.train.target.as_slice());
            let x_cal = s.calibration.features.view();
            let predictor = fit_predictor(&interpolating, x, y, seed).expect("tree fits");
            let plugin = build_plugin_with(predictor.clone(), &interpolating, x, y, x_cal, 0.5, &options, seed).expect("plugin");
            let scross = build_scross_with(predictor, &interpolating, x, y, x_cal, 0.5, &options, seed).expect("scross");
            let constant = |scores: Vec<f64>| {
                let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo <= 1e-12
            };
            plugin_degenerate += usize::from(constant(plugin.scores(s.test.features.view()).unwrap()));
            scross_varied += usize::from(!constant(scross.scores(s.test.features.view()).unwrap()));
            cells += 1;
        }
    }
    let p = plugin_degenerate as f64 / cells as f64;
    let q = scross_varied as f64 / cells as f64;
    verdict(
        p >= 0.80 && q >= 0.90,
        format!("PlugIn constant scores on {:.1}% of {cells} cells (>= 80%), SCross non-constant on {:.1}% (>= 90%)", 100.0 * p, 100.0 * q),
    )
}

fn criterion_3() -> Verdict {
    let (outcome, _) = grid();
    let names: Vec<String> = (0..5).map(|i| format!("synth-{i:02}")).collect();
    let records: Vec<&EvaluationRecord> = outcome.records.iter().filter(|r| names.contains(&r.dataset)).collect();
    let mean_at_half = |m: Method| {
        let v: Vec<f64> = records.iter().filter(|r| r.method == m && r.target_coverage == 0.5).map(|r| r.delta_mse).collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (doubt, n_doubt) = mean_at_half(Method::DoubtVar);
    let (plugin, n_plugin) = mean_at_half(Method::Plugin);

    let mut cells: BTreeMap<(String, u64, u64), Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in &records {
        cells.entry((r.dataset.clone(), r.seed, (r.target_coverage * 1e6).round() as u64)).or_default().push(r);
    }
    let mut violations = Vec::new();
    for group in cells.values() {
        let gold = group.iter().find(|r| r.method == Method::Goldcase).expect("goldcase record");
        for r in group.iter().filter(|r| r.method != Method::Goldcase && r.delta_mse < gold.delta_mse) {
            violations.push(format!(
                "{} on {} seed {} at c={}: accepted {:.3} vs GoldCase {:.3}",
                r.method.display_name(),
                r.dataset,
                r.seed,
                r.target_coverage,
                r.actual_coverage,
                gold.actual_coverage
            ));
        }
    }
    let pass = n_doubt == 25 && n_plugin == 25 && doubt <= -0.25 && doubt <= plugin - 0.10 && violations.is_empty();
    let mut detail = format!(
        "mean dMSE at c=0.5: DoubtVar {:.1}%, PlugIn {:.1}%; GoldCase dominance violations {} over {} cells",
        100.0 * doubt,
        100.0 * plugin,
        violations.len(),
        cells.len()
    );
    if !violations.is_empty() {
        detail.push_str(&format!(" ({})", violations.join("; ")));
    }
    verdict(pass, detail)
}

fn oracle_quantile(scores: &[f64], alpha: f64) -> f64 {
    // Selection by repeated minimum scan.
    let mut rest = scores.to_vec();
    let mut sorted = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        let k = (0..rest.len()).fold(0, |best, i| if rest[i] < rest[best] { i } else { best });
        sorted.push(rest.swap_remove(k));
    }
    let position = alpha * (sorted.len() - 1) as f64;
    let below = position.floor() as usize;
    let weight = position - below as f64;
    match sorted.get(below + 1) {
        Some(&next) if weight > 0.0 => sorted[below] * (1.0 - weight) + next * weight,
        _ => sorted[below],
    }
}

fn criterion_4() -> Verdict {
    let mut rng = rng_from_seed(4);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..1000 {
        let n = rng.random_range(1..=250);
        let scores: Vec<f64> = match i % 3 {
            0 => (0..n).map(|_| rng.random::<f64>()).collect(),
            1 => (0..n).map(|_| f64::from(rng.random_range(0..8u8))).collect(),
            _ => (0..n).map(|_| (rng.random::<f64>() * 40.0).exp()).collect(),
        };
        let alpha = match i % 4 {
            0 => BENCHMARK_COVERAGES[rng.random_range(0..BENCHMARK_COVERAGES.len())],
            1 => 1.0,
            _ => 1.0 - rng.random::<f64>(),
        };
        let got = calibrate_threshold(&scores, alpha).expect("valid instance");
        let want = oracle_quantile(&scores, alpha);
        let err = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(err);
        failures += usize::from(err > 1e-12);
    }
    verdict(failures == 0, format!("{failures} of 1000 instances off; worst relative error {worst:.2e} (<= 1e-12)"))
}

/// Minimum-cost perfect matching on a square matrix (Hungarian method with
/// potentials).
fn assignment_cost(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let (mut delta, mut next) = (f64::INFINITY, 0);
            for col in 1..=n {
                if !used[col] {
                    let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                    if reduced < min_to[col] {
                        min_to[col] = reduced;
                        way[col] = col0;
                    }
                    if min_to[col] < delta {
                        delta = min_to[col];
                        next = col;
                    }
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|col| cost[owner[col] - 1][col - 1]).sum()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Exact W1 between two empirical measures: replicate both to a common
/// size and solve the optimal assignment.
fn transport_oracle(a: &[f64], b: &[f64]) -> f64 {
    let l = a.len() / gcd(a.len(), b.len()) * b.len();
    let rep = |s: &[f64]| -> Vec<f64> { s.iter().flat_map(|&v| std::iter::repeat_n(v, l / s.len())).collect() };
    let (ra, rb) = (rep(a), rep(b));
    let cost: Vec<Vec<f64>> = ra.iter().map(|x| rb.iter().map(|y| (x - y).abs()).collect()).collect();
    assignment_cost(&cost) / l as f64
}

fn criterion_5() -> Verdict {
    let mut rng = rng_from_seed(5);
    let normal = Normal::new(0.0, 2.0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..200 {
        let (m, n) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let mut draw = |k: usize| -> Vec<f64> {
            if i % 4 == 0 {
                (0..k).map(|_| f64::from(rng.random_range(0..4u8))).collect()
            } else {
                (0..k).map(|_| normal.sample(&mut rng)).collect()
            }
        };
        let (a, b) = (draw(m), draw(n));
        let got = wasserstein_1d(&a, &b).expect("non-empty samples");
        worst = worst.max((got - transport_oracle(&a, &b)).abs());
    }
    verdict(worst <= 1e-9, format!("worst |W1 - OT| over 200 pairs {worst:.2e} (<= 1e-9)"))
}

fn random_matrix(rng: &mut selreg::rng::Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 - 1.0)
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let d = 5;
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    // Feature 4 never enters the model.
    let model = |x: &[f64]| (x[0] * 1.7).sin() * x[1] + x[2] * x[2] + 0.5 * x[0] * x[3] + (0.3 * x[1]).exp();
    let mut rng = rng_from_seed(6);
    let (mut eff, mut null, mut closed, mut base_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut outside, mut entries) = (0, 0);
    for instance in 0..5u64 {
        let x = random_matrix(&mut rng, 6, d);
        let bg = random_matrix(&mut rng, 16, d);
        let exact = shapley(&model, x.view(), bg.view(), &names, ShapleyMode::Exact, instance).unwrap();
        let base: f64 = bg.rows().into_iter().map(|r| model(&r.to_vec())).sum::<f64>() / bg.nrows() as f64;
        base_err = base_err.max((exact.base_value - base).abs());
        for (i, row) in x.rows().into_iter().enumerate() {
            let total: f64 = exact.values.row(i).sum();
            eff = eff.max((total - (model(&row.to_vec()) - base)).abs());
            null = null.max(exact.values[[i, 4]].abs());
        }

        let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let b = rng.random::<f64>();
        let linear = |r: &[f64]| r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
        let lin = shapley(&linear, x.view(), bg.view(), &names, ShapleyMode::Exact, instance).unwrap();
        let fast = additive_shapley(&w, b, x.view(), bg.view(), &names).unwrap();
        let means = bg.mean_axis(Axis(0)).unwrap();
        for i in 0..x.nrows() {
            for j in 0..d {
                let want = w[j] * (x[[i, j]] - means[j]);
                closed = closed.max((lin.values[[i, j]] - want).abs()).max((fast.values[[i, j]] - want).abs());
            }
        }

        let perm = shapley(&model, x.view(), bg.view(), &names, ShapleyMode::Permutation { samples: 2000 }, instance).unwrap();
        let se = perm.std_errors.as_ref().expect("permutation mode reports standard errors");
        for i in 0..x.nrows() {
            for j in 0..d {
                entries += 1;
                let gap = (perm.values[[i, j]] - exact.values[[i, j]]).abs();
                if gap > 3.0 * se[[i, j]] + 1e-12 {
                    outside += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = eff <= 1e-6 && null <= 1e-9 && base_err <= 1e-9 && closed <= 1e-9 && outside == 0 && elapsed.as_secs() <= 120;
    verdict(
        pass,
        format!(
            "efficiency {eff:.1e}, null player {null:.1e}, linear closed form {closed:.1e}, permutation outside 3 SE {outside}/{entries}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rates = Vec::new();
    for seed in 0..10u64 {
        let data = synth_heteroscedastic(500, 3, NoiseProfile::Constant { sigma: 0.3 }, 700 + seed).dataset;
        let plan = split_rows(500, &[("train", 0.8), ("test", 0.2)], seed).unwrap();
        let (train, test) = (data.subset(&plan.rows_of(0)), data.subset(&plan.rows_of(1)));
        let cf = cross_fit(&LearnerSpec::Linear, train.features.view(), &train.target, 5, seed).unwrap();
        let cv = CvPlusModel::new(cf, &train.target, 0.95).unwrap();
        let intervals = cv.intervals(test.features.view()).unwrap();
        let covered = intervals.iter().zip(&test.target).filter(|((lo, hi), y)| lo <= *y && *y <= hi).count();
        rates.push(covered as f64 / test.n() as f64);
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let lowest = rates.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(mean >= 0.90, format!("mean coverage of 95% CV+ intervals {:.1}% over 10 seeds (>= 90%), lowest seed {:.1}%", 100.0 * mean, 100.0 * lowest))
}

// House-price audit shared by criteria 8 and 9.
fn house_audit() -> &'static (Result<AuditResult, String>, Duration) {
    static AUDIT: OnceLock<(Result<AuditResult, String>, Duration)> = OnceLock::new();
    AUDIT.get_or_init(|| {
        let cfg = config(json!({
            "datasets": [{"kind": "house_prices", "name": "house", "n": 6000, "seed": 2026}],
            "seeds": [0],
            "learner": {"kind": "gbt"},
            "audit": {"method": "doubt_var", "target_coverage": 0.8, "repeats": 5, "noise_mean": 5.0, "noise_sd": 1.0},
        }));
        let start = Instant::now();
        let raw = data::load(&cfg.datasets[0]).expect("house data");
        let result = run_audit_cell(&cfg, cfg.audit.as_ref().unwrap(), "house", &raw, 0).map_err(|e| e.to_string());
        (result, start.elapsed())
    })
}

fn criterion_8() -> Verdict {
    match house_audit() {
        (Ok(r), elapsed) => {
            let auc = r.summary.test_auc.unwrap_or(f64::NAN);
            verdict(
                auc >= 0.80 && elapsed.as_secs() <= 180,
                format!("held-out audit AUC {auc:.3} (>= 0.80), training AUC {:.3}, {:.1}s", r.summary.training_auc, elapsed.as_secs_f64()),
            )
        }
        (Err(e), _) => verdict(false, format!("audit failed: {e}")),
    }
}

fn criterion_9() -> Verdict {
    let r = match house_audit() {
        (Ok(r), _) => r,
        (Err(e), _) => return verdict(false, format!("audit failed: {e}")),
    };
    let rows: Vec<(&str, f64)> = r
        .shift
        .rows
        .iter()
        .filter(|row| row.scenario == row.feature)
        .map(|row| (row.feature.as_str(), row.mean_distance))
        .collect();
    let random = rows.iter().find(|(f, _)| *f == RANDOM_FEATURE).map(|(_, d)| *d).unwrap_or(f64::NAN);
    let (closest, closest_d) = rows
        .iter()
        .filter(|(f, _)| *f != RANDOM_FEATURE)
        .fold(("", f64::INFINITY), |best, &(f, d)| if d < best.1 { (f, d) } else { best });
    let top = r.summary.most_predictive_distance.unwrap_or(f64::NAN);
    let ratio = top / random;
    verdict(
        random < closest_d && ratio >= 5.0,
        format!(
            "random feature {random:.3} vs smallest other {closest} {closest_d:.3}; most predictive {} {top:.3}, ratio {ratio:.1} (>= 5)",
            r.summary.most_predictive_feature
        ),
    )
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let bench = json!({
        "datasets": [
            {"kind": "synthetic", "name": "a", "n": 400, "d": 4},
            {"kind": "synthetic", "name": "b", "n": 300, "d": 3, "noise": {"kind": "interaction", "base": 0.1, "scale": 1.0}},
            {"kind": "house_prices", "name": "h", "n": 400, "seed": 1},
        ],
        "seeds": [0, 1, 2],
        "learner": {"kind": "gbt", "n_rounds": 30},
    });
    let audit = json!({
        "datasets": [{"kind": "house_prices", "name": "house", "n": 1200, "seed": 9}],
        "seeds": [0, 1, 2],
        "learner": {"kind": "gbt", "n_rounds": 30},
        "audit": {"repeats": 2, "joint_shift": ["X_Random", "GrLivArea"]},
    });
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (command, cfg) in [("bench", bench), ("audit", audit)] {
        let cfg_path = tmp.path().join(format!("{command}.json"));
        fs::write(&cfg_path, cfg.to_string()).unwrap();
        let mut dirs = Vec::new();
        for jobs in ["1", "8"] {
            let out = tmp.path().join(format!("{command}-{jobs}"));
            let status = Command::new(env!("CARGO_BIN_EXE_selreg"))
                .args([command, "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs])
                .output()
                .expect("binary runs");
            if status.status.code() != Some(0) {
                mismatches.push(format!("{command} --jobs {jobs} exited {:?}", status.status.code()));
            }
            dirs.push(out);
        }
        let files = files_under(&dirs[0]);
        if files != files_under(&dirs[1]) {
            mismatches.push(format!("{command}: different file sets"));
        }
        for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
            compared += 1;
            if fs::read(dirs[0].join(f)).ok() != fs::read(dirs[1].join(f)).ok() {
                mismatches.push(format!("{command}: {} differs", f.display()));
            }
        }
    }
    verdict(
        mismatches.is_empty() && compared > 0,
        if mismatches.is_empty() {
            format!("{compared} CSV files byte-identical at --jobs 1 and --jobs 8")
        } else {
            mismatches.join("; ")
        },
    )
}

fn criterion_11() -> Verdict {
    let methods = [Method::DoubtVar, Method::DoubtInt, Method::Plugin, Method::Scross, Method::Cvplus];
    let learner = LearnerSpec::Tree(TreeParams { max_depth: Some(3), min_samples_leaf: 5 });
    let options = SelectiveOptions::default();
    let profile = |i: u64| match i % 3 {
        0 => NoiseProfile::Increasing { base: 0.1, slope: 1.0 },
        1 => NoiseProfile::Interaction { base: 0.05, scale: 2.0 },
        _ => NoiseProfile::Constant { sigma: 0.5 },
    };
    let mut rng = rng_from_seed(11);

    let mut nesting_violations = 0;
    for i in 0..100u64 {
        let data = synth_heteroscedastic(160, 1 + (i % 4) as usize, profile(i), 1100 + i).dataset;
        let plan = split_rows(data.n(), &[("train", 0.5), ("calibration", 0.25), ("test", 0.25)], i).unwrap();
        let part = |k| data.subset(&plan.rows_of(k));
        let (train, cal, test) = (part(0), part(1), part(2));
        let method = methods[(i % 5) as usize];
        let model = build(method, &learner, train.features.view(), &train.target, cal.features.view(), 0.9, &options, i).unwrap();
        let scores = model.score_batch(test.features.view(), None).unwrap().scores;
        let mut grid = default_coverage_grid();
        grid.extend((0..10).map(|_| 1.0 - rng.random::<f64>()));
        grid.sort_by(f64::total_cmp);
        let sets: Vec<Vec<bool>> = grid
            .iter()
            .map(|&a| {
                let tau = model.threshold_for(a).unwrap();
                scores.iter().map(|&s| accepts(s, tau)).collect()
            })
            .collect();
        for pair in sets.windows(2) {
            nesting_violations += pair[0].iter().zip(&pair[1]).filter(|(small, large)| **small && !**large).count();
        }
    }

    let mut curve_violations = 0;
    let grid: Vec<f64> = (0..20).map(|k| 1.0 - 0.05 * k as f64).collect();
    for i in 0..100u64 {
        let data = synth_heteroscedastic(120, 1 + (i % 5) as usize, profile(i), 1200 + i).dataset;
        let plan = split_rows(data.n(), &[("train", 0.5), ("test", 0.5)], i).unwrap();
        let (train, test) = (data.subset(&plan.rows_of(0)), data.subset(&plan.rows_of(1)));
        let predictor = fit_predictor(&learner, train.features.view(), &train.target, i).unwrap();
        let gold = build_goldcase(predictor, test.features.view(), &test.target, 0.5).unwrap();
        let mut curve = risk_coverage_curve(&gold, test.features.view(), &test.target, &grid, 0.05, i).unwrap();
        curve.sort_by(|a, b| b.actual_coverage.total_cmp(&a.actual_coverage));
        let risks: Vec<f64> = curve.iter().filter_map(|r| r.mse_accepted).collect();
        curve_violations += risks.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
    }
    verdict(
        nesting_violations == 0 && curve_violations == 0,
        format!("nesting violations {nesting_violations} over 100 models, GoldCase risk increases {curve_violations} over 100 curves"),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, fn() -> Verdict); 11] = [
        (1, "coverage satisfaction rate", criterion_1),
        (2, "PlugIn failure mode", criterion_2),
        (3, "relative MSE ordering at c = 0.5", criterion_3),
        (4, "threshold oracle equivalence", criterion_4),
        (5, "Wasserstein transport oracle", criterion_5),
        (6, "Shapley properties", criterion_6),
        (7, "CV+ marginal coverage", criterion_7),
        (8, "audit AUC", criterion_8),
        (9, "shift ranking", criterion_9),
        (10, "determinism across thread counts", criterion_10),
        (11, "monotonicity suites", criterion_11),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
