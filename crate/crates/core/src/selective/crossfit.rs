//! Fold assignment and out-of-fold fitting shared by the cross-fitted
//! residual selector and CV+.

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::learners::{fit, FittedModel, LearnerSpec};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Shuffled contiguous folds whose sizes differ by at most one.
pub fn kfold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidParameter(format!("{n} rows cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, stream::FOLDS)));
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos * k / n;
    }
    Ok(fold)
}

pub struct CrossFit {
    pub fold_of_row: Vec<usize>,
    pub fold_models: Vec<FittedModel>,
    /// Prediction for each training row from the model that did not see it.
    pub out_of_fold: Vec<f64>,
}

pub fn cross_fit(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[f64], k: usize, seed: u64) -> Result<CrossFit> {
    let n = x.nrows();
    let fold_of_row = kfold_assignment(n, k, seed)?;
    let mut fold_models = Vec::with_capacity(k);
    let mut out_of_fold = vec![f64::NAN; n];
    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of_row[i] != fold).collect();
        let held: Vec<usize> = (0..n).filter(|&i| fold_of_row[i] == fold).collect();
        if held.is_empty() {
            return Err(Error::InvalidParameter(format!("fold {fold} is empty")));
        }
        let xt = x.select(Axis(0), &train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = fit(spec, xt.view(), &yt, derive_seed(seed, fold as u64))?;
        let preds = model.predict(x.select(Axis(0), &held).view())?;
        for (&i, p) in held.iter().zip(preds) {
            out_of_fold[i] = p;
        }
        fold_models.push(model);
    }
    Ok(CrossFit {
        fold_of_row,
        fold_models,
        out_of_fold,
    })
}

/// Squared out-of-fold residuals `(y_i − f̂_{−k(i)}(x_i))²`.
pub fn cross_fitted_residuals(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[f64], k: usize, seed: u64) -> Result<Vec<f64>> {
    let cf = cross_fit(spec, x, y, k, seed)?;
    Ok(cf.out_of_fold.iter().zip(y).map(|(p, t)| (t - p).powi(2)).collect())
}
