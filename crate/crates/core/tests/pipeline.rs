use std::fs;

use selreg::dataset::{add_random_feature, load_csv, preprocess, split_rows, synth_house_prices, write_dataset_csv};
use selreg::explain::{fit_audit, sample_background, shift_audit, univariate_scenarios, AuditOutput, ShiftOptions, ShiftScenario};
use selreg::learners::{GbtParams, LearnerSpec};
use selreg::metrics::{default_coverage_grid, risk_coverage_curve};
use selreg::selective::{build, Method, SelectiveModel, SelectiveOptions};

fn small_gbt() -> LearnerSpec {
    LearnerSpec::Gbt(GbtParams {
        n_rounds: 20,
        max_depth: 3,
        ..GbtParams::default()
    })
}

#[test]
fn csv_to_evaluated_selective_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("houses.csv");
    let mut text = String::from("area,style,price\n");
    for i in 0..300 {
        let area = 50.0 + (i * 37 % 200) as f64;
        let style = ["flat", "villa", "loft"][i % 3];
        let price = 2.0 * area + if style == "villa" { 80.0 } else { 0.0 } + ((i * 7919) % 13) as f64 * area / 40.0;
        text.push_str(&format!("{area},{style},{price}\n"));
    }
    fs::write(&path, text).unwrap();

    let raw = load_csv(&path, "price", None).unwrap();
    let plan = split_rows(raw.n(), &[("train", 0.6), ("calibration", 0.2), ("test", 0.2)], 3).unwrap();
    let (data, record) = preprocess(&raw, &plan.rows_of(0)).unwrap();
    assert_eq!(data.feature_names(), vec!["area", "style=flat", "style=villa", "style=loft"]);
    assert_eq!(record.output_names(), data.feature_names());

    let (train, cal, test) = (data.subset(&plan.rows_of(0)), data.subset(&plan.rows_of(1)), data.subset(&plan.rows_of(2)));
    let model = build(
        Method::DoubtVar,
        &small_gbt(),
        train.features.view(),
        &train.target,
        cal.features.view(),
        0.8,
        &SelectiveOptions::default(),
        3,
    )
    .unwrap();
    let grid = default_coverage_grid();
    let curve = risk_coverage_curve(&model, test.features.view(), &test.target, &grid, 0.05, 3).unwrap();
    assert_eq!(curve.len(), grid.len());
    for pair in curve.windows(2) {
        assert!(pair[1].actual_coverage <= pair[0].actual_coverage);
    }

    let restored = SelectiveModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(
        restored.predict_selective(test.features.view()).unwrap(),
        model.predict_selective(test.features.view()).unwrap()
    );

    let out = dir.path().join("scaled.csv");
    write_dataset_csv(&data, fs::File::create(&out).unwrap()).unwrap();
    let reread = load_csv(&out, "price", None).unwrap();
    assert_eq!(reread.n(), data.n());
    assert_eq!(reread.d(), data.d());
}

#[test]
fn house_audit_and_shift_study() {
    let raw = synth_house_prices(1200, 8);
    let plan = split_rows(raw.n(), &[("train", 0.25), ("calibration", 0.25), ("validation", 0.25), ("test", 0.25)], 1).unwrap();
    let (data, _) = preprocess(&raw, &plan.rows_of(0)).unwrap();
    let data = add_random_feature(&data, 1);
    let part = |k| data.subset(&plan.rows_of(k));
    let (train, cal, val, test) = (part(0), part(1), part(2), part(3));
    let model = build(
        Method::DoubtVar,
        &small_gbt(),
        train.features.view(),
        &train.target,
        cal.features.view(),
        0.8,
        &SelectiveOptions::default(),
        1,
    )
    .unwrap();
    let flags = |d: &selreg::dataset::Dataset| -> Vec<bool> {
        model.predict_selective(d.features.view()).unwrap().iter().map(|p| p.accepted).collect()
    };
    let names = data.feature_names();
    let audit = fit_audit(val.features.view(), &flags(&val), &names, &LearnerSpec::logistic(), AuditOutput::LogOdds, 1).unwrap();
    assert!(audit.auc(test.features.view(), &flags(&test)).unwrap() > 0.6);

    let test_flags = flags(&test);
    let kept: Vec<usize> = (0..test.n()).filter(|&i| test_flags[i]).collect();
    let accepted = test.subset(&kept);
    let background = sample_background(val.features.view(), 50, 1);
    let mut scenarios = univariate_scenarios(&names[..2]);
    scenarios.push(ShiftScenario::joint(&["X_Random".to_string(), "GrLivArea".to_string()]));
    let options = ShiftOptions {
        repeats: 2,
        ..ShiftOptions::default()
    };
    let report = shift_audit(&model, &audit, &accepted, background.view(), &scenarios, &options, 1).unwrap();
    let labels: Vec<&str> = report.rows.iter().map(|r| r.feature.as_str()).collect();
    assert_eq!(labels, vec!["GrLivArea", "OverallQual", "joint(X_Random+GrLivArea):X_Random", "joint(X_Random+GrLivArea):GrLivArea"]);
    assert!(report.rows.iter().all(|r| r.mean_distance >= 0.0 && r.distances.len() == 2));
    assert_eq!(report.n_rows, accepted.n());
}
