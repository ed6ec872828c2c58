//! Stagewise squared-error boosting: start from the target mean, then fit
//! each depth-limited tree to the current residuals and add it scaled by
//! the learning rate.

use ndarray::ArrayView2;

use super::tree::{Presorted, TreeGrower};
use super::{GbtParams, ModelParams};
use crate::stats;

pub(super) fn fit(x: ArrayView2<f64>, y: &[f64], params: &GbtParams) -> ModelParams {
    fit_traced(x, y, params).0
}

/// Also returns the training MSE after every round.
pub(super) fn fit_traced(x: ArrayView2<f64>, y: &[f64], params: &GbtParams) -> (ModelParams, Vec<f64>) {
    let n = x.nrows();
    let rows: Vec<usize> = (0..n).collect();
    let data = Presorted::new(x, &rows, y);
    let grower = TreeGrower {
        data: &data,
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
        l2: params.l2_regularization,
    };
    let base = stats::mean(y);
    let mut current = vec![base; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut trace = Vec::with_capacity(params.n_rounds);
    let mut row = vec![0.0; x.ncols()];
    for _ in 0..params.n_rounds {
        for i in 0..n {
            residuals[i] = y[i] - current[i];
        }
        let tree = grower.grow(&residuals, None);
        for (i, r) in x.rows().into_iter().enumerate() {
            row.iter_mut().zip(r.iter()).for_each(|(dst, src)| *dst = *src);
            current[i] += params.learning_rate * tree.predict_row(&row);
        }
        trace.push(current.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64);
        trees.push(tree);
    }
    (
        ModelParams::Gbt {
            base,
            learning_rate: params.learning_rate,
            trees,
        },
        trace,
    )
}
