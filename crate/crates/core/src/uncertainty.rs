//! Bootstrap uncertainty for any base learner.
//!
//! `B` members are trained on resamples of the training set. Every
//! training row that some member left out gets an out-of-bag residual
//! `y_i − mean_{b ∌ i} f_b(x_i)`; the pool of those residuals is recentred
//! to mean zero. At a query point the uncertainty set is the cross sum
//!
//! ```text
//! C(x) = { (f_b(x) − f̄(x)) + r  :  b ∈ members, r ∈ pool }
//! ```
//!
//! which combines model variance (spread of the members) with observation
//! noise (the residuals). Intervals come from quantiles of `C(x)` shifted
//! by `f̄(x)`; the variance score is the population variance of `C(x)`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit, FittedModel, LearnerSpec};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::stats;

/// Maximum size of a realised uncertainty set.
pub const DEFAULT_SET_CAP: usize = 10_000;

/// `max(2, ⌊√n⌋)`.
pub fn default_bootstraps(n_train: usize) -> usize {
    ((n_train as f64).sqrt().floor() as usize).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub bootstraps: Option<usize>,
    pub set_cap: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            bootstraps: None,
            set_cap: DEFAULT_SET_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble {
    pub members: Vec<FittedModel>,
    /// In-bag indicator per member and training row.
    pub member_row_masks: Vec<Vec<bool>>,
    /// Recentred out-of-bag residuals.
    pub residual_pool: Vec<f64>,
    /// Residuals entering `C(x)`: the whole pool, or a seeded subsample of
    /// it when `B·|pool|` would exceed the set cap.
    pub set_pool: Vec<f64>,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    pub values: Vec<f64>,
    pub center: f64,
}

pub fn fit_ensemble(
    spec: &LearnerSpec,
    x: ArrayView2<f64>,
    y: &[f64],
    bootstraps: Option<usize>,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    fit_ensemble_with(
        spec,
        x,
        y,
        EnsembleOptions {
            bootstraps,
            ..EnsembleOptions::default()
        },
        seed,
    )
}

pub fn fit_ensemble_with(
    spec: &LearnerSpec,
    x: ArrayView2<f64>,
    y: &[f64],
    options: EnsembleOptions,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < 4 {
        return Err(Error::InvalidParameter(format!("bootstrap ensemble needs >= 4 rows, got {n}")));
    }
    let b = options.bootstraps.unwrap_or_else(|| default_bootstraps(n));
    if b < 2 {
        return Err(Error::InvalidParameter("bootstrap ensemble needs >= 2 members".into()));
    }
    if options.set_cap < 1 {
        return Err(Error::InvalidParameter("uncertainty set cap must be >= 1".into()));
    }

    let resample_base = derive_seed(seed, stream::BOOTSTRAP);
    let learner_base = derive_seed(seed, stream::LEARNER);
    let fitted: Vec<(FittedModel, Vec<bool>, Vec<f64>)> = (0..b)
        .into_par_iter()
        .map(|member| {
            let mut rng = rng_from_seed(derive_seed(resample_base, member as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            for &i in &rows {
                in_bag[i] = true;
            }
            let xb = x.select(Axis(0), &rows);
            let yb: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let model = fit(spec, xb.view(), &yb, derive_seed(learner_base, member as u64))?;
            let preds = model.predict(x)?;
            Ok((model, in_bag, preds))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut residual_pool = Vec::new();
    for i in 0..n {
        let (sum, count) = fitted
            .iter()
            .filter(|(_, in_bag, _)| !in_bag[i])
            .fold((0.0, 0usize), |(s, c), (_, _, preds)| (s + preds[i], c + 1));
        if count > 0 {
            residual_pool.push(y[i] - sum / count as f64);
        }
    }
    if residual_pool.len() < 2 {
        return Err(Error::InsufficientOob(residual_pool.len()));
    }
    let centre = stats::mean(&residual_pool);
    residual_pool.iter_mut().for_each(|r| *r -= centre);

    let per_member = options.set_cap / b;
    let set_pool = if b * residual_pool.len() > options.set_cap {
        let keep = per_member.max(1);
        let mut rng = rng_from_seed(derive_seed(seed, stream::SUBSAMPLE));
        let mut picked = index::sample(&mut rng, residual_pool.len(), keep).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|k| residual_pool[k]).collect()
    } else {
        residual_pool.clone()
    };

    let (members, member_row_masks): (Vec<_>, Vec<_>) = fitted.into_iter().map(|(m, mask, _)| (m, mask)).unzip();
    Ok(BootstrapEnsemble {
        members,
        member_row_masks,
        residual_pool,
        set_pool,
        n_train: n,
    })
}

const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct EnsembleEnvelope {
    format_version: u32,
    ensemble: BootstrapEnsemble,
}

impl BootstrapEnsemble {
    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_features(&self) -> usize {
        self.members[0].n_features
    }

    /// Member predictions, one row per query row and one column per member.
    pub fn member_predictions(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let columns = self
            .members
            .par_iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Array2::zeros((x.nrows(), self.members.len()));
        for (b, col) in columns.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                out[[i, b]] = v;
            }
        }
        Ok(out)
    }

    fn row_predictions(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(self.members.iter().map(|m| m.predict_row(row)).collect())
    }

    /// Uncertainty set from the members' predictions at one point.
    pub fn set_from_predictions(&self, member_preds: &[f64]) -> UncertaintySet {
        let center = stats::mean(member_preds);
        let mut values = Vec::with_capacity(member_preds.len() * self.set_pool.len());
        for p in member_preds {
            let dev = p - center;
            values.extend(self.set_pool.iter().map(|r| dev + r));
        }
        UncertaintySet { values, center }
    }

    pub fn c_set(&self, row: &[f64]) -> Result<UncertaintySet> {
        Ok(self.set_from_predictions(&self.row_predictions(row)?))
    }

    pub fn interval_from_predictions(&self, member_preds: &[f64], lo_q: f64, hi_q: f64) -> Result<(f64, f64)> {
        if !(0.0 < lo_q && lo_q < hi_q && hi_q < 1.0) {
            return Err(Error::InvalidParameter(format!("interval quantiles ({lo_q}, {hi_q})")));
        }
        let mut set = self.set_from_predictions(member_preds);
        let lo = stats::quantile_select(&mut set.values, lo_q);
        let hi = stats::quantile_select(&mut set.values, hi_q);
        Ok((set.center + lo, set.center + hi))
    }

    pub fn interval(&self, row: &[f64], lo_q: f64, hi_q: f64) -> Result<(f64, f64)> {
        self.interval_from_predictions(&self.row_predictions(row)?, lo_q, hi_q)
    }

    /// Population variance of the set built from these member predictions.
    /// Deviations and pool enter the cross sum independently, so the
    /// variance is `Var(deviations) + Var(pool)`.
    pub fn variance_from_predictions(&self, member_preds: &[f64]) -> f64 {
        stats::variance(member_preds) + stats::variance(&self.set_pool)
    }

    pub fn variance(&self, row: &[f64]) -> Result<f64> {
        Ok(self.variance_from_predictions(&self.row_predictions(row)?))
    }

    /// Ensemble-mean prediction per row.
    pub fn predict_mean(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let preds = self.member_predictions(x)?;
        Ok(preds.rows().into_iter().map(|r| r.mean().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&EnsembleEnvelope {
            format_version: ENSEMBLE_FORMAT_VERSION,
            ensemble: self.clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let envelope: EnsembleEnvelope = serde_json::from_str(json)?;
        if envelope.format_version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported ensemble format version {}",
                envelope.format_version
            )));
        }
        Ok(envelope.ensemble)
    }
}
