//! L2-regularised logistic regression fitted by damped Newton steps.
//!
//! Objective: `Σ_i [softplus(z_i) − y_i z_i] + ½·λ·‖w‖²` with
//! `z_i = w·x_i + b`; the bias is unpenalised.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use super::{LogisticParams, ModelParams};
use crate::error::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularised negative log-likelihood with its gradient in `w` and `b`.
pub fn logistic_objective(weights: &[f64], bias: f64, x: ArrayView2<f64>, y: &[f64], l2: f64) -> (f64, Vec<f64>, f64) {
    let d = weights.len();
    let mut value = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    let mut grad_w: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = 0.0;
    for (row, &t) in x.rows().into_iter().zip(y) {
        let z = bias + (0..d).map(|j| weights[j] * row[j]).sum::<f64>();
        value += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for j in 0..d {
            grad_w[j] += r * row[j];
        }
        grad_b += r;
    }
    (value, grad_w, grad_b)
}

pub(super) fn fit(x: ArrayView2<f64>, y: &[f64], params: &LogisticParams) -> Result<ModelParams> {
    if y.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidParameter("logistic labels must be 0 or 1".into()));
    }
    let positives = y.iter().filter(|&&t| t == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let d = x.ncols();
    let l2 = params.l2_strength;
    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let (mut value, mut grad_w, mut grad_b) = logistic_objective(&weights, bias, x, y, l2);

    for _ in 0..params.max_iterations {
        let grad_norm = grad_w.iter().chain([&grad_b]).fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < params.tolerance {
            break;
        }
        // Hessian over (w, b) with the bias in the last slot.
        let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
        let mut ext = vec![1.0; d + 1];
        for row in x.rows() {
            let z = bias + (0..d).map(|j| weights[j] * row[j]).sum::<f64>();
            let p = sigmoid(z);
            let w = p * (1.0 - p);
            for j in 0..d {
                ext[j] = row[j];
            }
            for a in 0..=d {
                for b in 0..=a {
                    hess[(a, b)] += w * ext[a] * ext[b];
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
            hess[(a, a)] += if a < d { l2 } else { 0.0 } + 1e-10;
        }
        let grad = DVector::from_iterator(d + 1, grad_w.iter().copied().chain([grad_b]));
        let step = match hess.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => grad.clone(),
        };

        let slope = -grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand_w: Vec<f64> = (0..d).map(|j| weights[j] - t * step[j]).collect();
            let cand_b = bias - t * step[d];
            let (cand_value, cand_gw, cand_gb) = logistic_objective(&cand_w, cand_b, x, y, l2);
            if cand_value <= value + 1e-4 * t * slope {
                weights = cand_w;
                bias = cand_b;
                value = cand_value;
                grad_w = cand_gw;
                grad_b = cand_gb;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(ModelParams::Logistic { weights, bias })
}
