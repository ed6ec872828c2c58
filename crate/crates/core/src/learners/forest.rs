use ndarray::ArrayView2;
use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{Presorted, RegressionTree, TreeGrower};
use super::ForestParams;
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Per-tree feature budget: `ceil(fraction · d)`, at least one.
pub(super) fn features_per_split(fraction: f64, d: usize) -> usize {
    ((fraction * d as f64 - 1e-9).ceil() as usize).clamp(1, d.max(1))
}

pub(super) fn fit(x: ArrayView2<f64>, y: &[f64], params: &ForestParams, seed: u64) -> Vec<RegressionTree> {
    let n = x.nrows();
    let d = x.ncols();
    let base = derive_seed(seed, stream::LEARNER);
    let max_features = features_per_split(params.feature_fraction, d);
    (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(base, t as u64));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let targets: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let data = Presorted::new(x, &rows, &targets);
            TreeGrower {
                data: &data,
                max_depth: params.max_depth,
                min_samples_leaf: params.min_samples_leaf,
                max_features: Some(max_features),
                l2: 0.0,
            }
            .grow(&targets, Some(&mut rng))
        })
        .collect()
}
