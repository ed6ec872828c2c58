use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Largest feature count enumerated exactly (2^d coalitions per row).
pub const MAX_EXACT_FEATURES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapleyMode {
    Exact,
    /// Monte Carlo over `samples` random (permutation, background row) pairs.
    Permutation { samples: usize },
}

/// Interventional Shapley values: features outside a coalition are drawn
/// from the background rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyAttribution {
    pub feature_names: Vec<String>,
    /// Rows are explained points, columns features.
    pub values: Array2<f64>,
    /// Mean model output over the background.
    pub base_value: f64,
    /// Monte Carlo standard errors, permutation mode only.
    pub std_errors: Option<Array2<f64>>,
}

impl ShapleyAttribution {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }
}

fn check_inputs(x: ArrayView2<f64>, background: ArrayView2<f64>, names: &[String]) -> Result<()> {
    if background.nrows() == 0 {
        return Err(Error::InvalidParameter("empty Shapley background".into()));
    }
    if background.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), found: background.ncols() });
    }
    if names.len() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), found: names.len() });
    }
    Ok(())
}

/// Shapley values of `model` for each row of `x`.
pub fn shapley<F>(
    model: &F,
    x: ArrayView2<f64>,
    background: ArrayView2<f64>,
    feature_names: &[String],
    mode: ShapleyMode,
    seed: u64,
) -> Result<ShapleyAttribution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_inputs(x, background, feature_names)?;
    let d = x.ncols();
    let bg: Vec<Vec<f64>> = background.rows().into_iter().map(|r| r.to_vec()).collect();
    let base_value = bg.iter().map(|z| model(z)).sum::<f64>() / bg.len() as f64;
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut values = Array2::zeros((rows.len(), d));
    let mut std_errors = None;
    match mode {
        ShapleyMode::Exact => {
            if d > MAX_EXACT_FEATURES {
                return Err(Error::InvalidParameter(format!(
                    "exact Shapley supports at most {MAX_EXACT_FEATURES} features, got {d}"
                )));
            }
            let weights = coalition_weights(d);
            let phis: Vec<Vec<f64>> = rows.par_iter().map(|row| exact_row(model, row, &bg, &weights)).collect();
            for (i, phi) in phis.into_iter().enumerate() {
                values.row_mut(i).assign(&ndarray::Array1::from(phi));
            }
        }
        ShapleyMode::Permutation { samples } => {
            if samples < 1 {
                return Err(Error::InvalidParameter("permutation Shapley needs at least one sample".into()));
            }
            let base_seed = derive_seed(seed, stream::SHAPLEY);
            let out: Vec<(Vec<f64>, Vec<f64>)> = rows
                .par_iter()
                .enumerate()
                .map(|(i, row)| permutation_row(model, row, &bg, samples, derive_seed(base_seed, i as u64)))
                .collect();
            let mut se = Array2::zeros((rows.len(), d));
            for (i, (phi, err)) in out.into_iter().enumerate() {
                values.row_mut(i).assign(&ndarray::Array1::from(phi));
                se.row_mut(i).assign(&ndarray::Array1::from(err));
            }
            std_errors = Some(se);
        }
    }
    Ok(ShapleyAttribution {
        feature_names: feature_names.to_vec(),
        values,
        base_value,
        std_errors,
    })
}

/// Exact Shapley values of `f(x) = w·x + b`: with a background `Z`,
/// `φ_j = w_j (x_j − mean(Z_j))` and the base value is `f(mean(Z))`.
pub fn additive_shapley(
    weights: &[f64],
    intercept: f64,
    x: ArrayView2<f64>,
    background: ArrayView2<f64>,
    feature_names: &[String],
) -> Result<ShapleyAttribution> {
    check_inputs(x, background, feature_names)?;
    if weights.len() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), found: weights.len() });
    }
    let means = background.mean_axis(ndarray::Axis(0)).expect("background is nonempty");
    let base_value = intercept + weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    let values = Array2::from_shape_fn(x.dim(), |(i, j)| weights[j] * (x[[i, j]] - means[j]));
    Ok(ShapleyAttribution {
        feature_names: feature_names.to_vec(),
        values,
        base_value,
        std_errors: None,
    })
}

/// `|S|!(d−|S|−1)!/d!` indexed by `|S|`.
fn coalition_weights(d: usize) -> Vec<f64> {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    (0..d).map(|s| fact(s) * fact(d - s - 1) / fact(d)).collect()
}

fn exact_row<F: Fn(&[f64]) -> f64>(model: &F, row: &[f64], bg: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let d = row.len();
    let mut v = vec![0.0; 1 << d];
    let mut hybrid = vec![0.0; d];
    for (mask, slot) in v.iter_mut().enumerate() {
        let mut total = 0.0;
        for z in bg {
            for j in 0..d {
                hybrid[j] = if mask >> j & 1 == 1 { row[j] } else { z[j] };
            }
            total += model(&hybrid);
        }
        *slot = total / bg.len() as f64;
    }
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1 << j;
        for mask in 0..1usize << d {
            if mask & bit == 0 {
                *p += weights[mask.count_ones() as usize] * (v[mask | bit] - v[mask]);
            }
        }
    }
    phi
}

fn permutation_row<F: Fn(&[f64]) -> f64>(
    model: &F,
    row: &[f64],
    bg: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let d = row.len();
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..d).collect();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut hybrid = vec![0.0; d];
    for _ in 0..samples {
        order.shuffle(&mut rng);
        let z = &bg[rng.random_range(0..bg.len())];
        hybrid.copy_from_slice(z);
        let mut prev = model(&hybrid);
        for &j in &order {
            hybrid[j] = row[j];
            let next = model(&hybrid);
            let delta = next - prev;
            sum[j] += delta;
            sum_sq[j] += delta * delta;
            prev = next;
        }
    }
    let m = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let se = mean
        .iter()
        .zip(&sum_sq)
        .map(|(mu, sq)| {
            if samples < 2 {
                return f64::INFINITY;
            }
            let var = ((sq - m * mu * mu) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        })
        .collect();
    (mean, se)
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    fn grid(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn additive_model_closed_form() {
        let w = [0.5, -2.0, 1.5, 0.0];
        let model = |x: &[f64]| 0.3 + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let x = grid(5, 4, 1);
        let z = grid(1, 4, 2);
        let attr = shapley(&model, x.view(), z.view(), &names(4), ShapleyMode::Exact, 0).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                assert!((attr.values[[i, j]] - w[j] * (x[[i, j]] - z[[0, j]])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn additive_shortcut_matches_enumeration() {
        let w = [0.4, -1.1, 2.0];
        let model = |x: &[f64]| -0.2 + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let x = grid(4, 3, 11);
        let bg = grid(9, 3, 12);
        let exact = shapley(&model, x.view(), bg.view(), &names(3), ShapleyMode::Exact, 0).unwrap();
        let fast = additive_shapley(&w, -0.2, x.view(), bg.view(), &names(3)).unwrap();
        assert!((exact.base_value - fast.base_value).abs() < 1e-12);
        for (a, b) in exact.values.iter().zip(fast.values.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn efficiency_null_player_and_symmetry() {
        // Duplicated columns 0 and 1 enter symmetrically; column 3 is ignored.
        let model = |x: &[f64]| (x[0] * x[1] + 0.7 * x[2] * x[0] + x[1]).tanh() + x[0] + x[1];
        let mut x = grid(6, 4, 3);
        let mut bg = grid(8, 4, 4);
        for m in [&mut x, &mut bg] {
            for i in 0..m.nrows() {
                m[[i, 1]] = m[[i, 0]];
            }
        }
        let sym = |x: &[f64]| model(&[x[0], x[1], x[2], x[3]]) * 0.5 + model(&[x[1], x[0], x[2], x[3]]) * 0.5;
        let attr = shapley(&sym, x.view(), bg.view(), &names(4), ShapleyMode::Exact, 0).unwrap();
        for i in 0..6 {
            let row = x.row(i).to_vec();
            let total: f64 = attr.values.row(i).sum();
            assert!((attr.base_value + total - sym(&row)).abs() < 1e-9);
            assert!(attr.values[[i, 3]].abs() < 1e-12);
            assert!((attr.values[[i, 0]] - attr.values[[i, 1]]).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_agrees_with_exact() {
        let w = [1.2, -0.8, 0.5, 2.0, -1.5];
        let model = |x: &[f64]| {
            let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + x[0] * x[3];
            1.0 / (1.0 + (-s).exp())
        };
        let x = grid(4, 5, 5);
        let bg = grid(30, 5, 6);
        let exact = shapley(&model, x.view(), bg.view(), &names(5), ShapleyMode::Exact, 0).unwrap();
        let approx = shapley(&model, x.view(), bg.view(), &names(5), ShapleyMode::Permutation { samples: 2000 }, 9).unwrap();
        let se = approx.std_errors.as_ref().unwrap();
        for ((e, a), s) in exact.values.iter().zip(approx.values.iter()).zip(se.iter()) {
            assert!((e - a).abs() <= 3.0 * s + 1e-12, "{e} vs {a} (se {s})");
        }
    }

    #[test]
    fn permutation_is_deterministic() {
        let model = |x: &[f64]| x[0] * x[1] - x[2];
        let x = grid(3, 3, 7);
        let bg = grid(5, 3, 8);
        let mode = ShapleyMode::Permutation { samples: 50 };
        let a = shapley(&model, x.view(), bg.view(), &names(3), mode, 1).unwrap();
        let b = shapley(&model, x.view(), bg.view(), &names(3), mode, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_requests() {
        let model = |x: &[f64]| x[0];
        let wide = grid(1, 13, 1);
        assert!(shapley(&model, wide.view(), wide.view(), &names(13), ShapleyMode::Exact, 0).is_err());
        let x = grid(1, 2, 1);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(shapley(&model, x.view(), empty.view(), &names(2), ShapleyMode::Exact, 0).is_err());
        assert!(shapley(&model, x.view(), x.view(), &names(2), ShapleyMode::Permutation { samples: 0 }, 0).is_err());
    }
}
