//! Ordinary least squares on centred data. A ridge jitter of 1e-8 on the
//! normal-equation diagonal keeps rank-deficient designs solvable.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use super::ModelParams;
use crate::stats;

const JITTER: f64 = 1e-8;

pub(super) fn fit(x: ArrayView2<f64>, y: &[f64]) -> ModelParams {
    let n = x.nrows();
    let d = x.ncols();
    let y_mean = stats::mean(y);
    let x_means: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut centred = vec![0.0; d];
    for (i, row) in x.rows().into_iter().enumerate() {
        for j in 0..d {
            centred[j] = row[j] - x_means[j];
        }
        let yc = y[i] - y_mean;
        for a in 0..d {
            rhs[a] += centred[a] * yc;
            for b in 0..=a {
                gram[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
        gram[(a, a)] += JITTER;
    }
    let coefficients: Vec<f64> = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs).iter().copied().collect(),
        None => gram
            .lu()
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; d]),
    };
    let intercept = y_mean - coefficients.iter().zip(&x_means).map(|(c, m)| c * m).sum::<f64>();
    ModelParams::Linear { coefficients, intercept }
}
