//! Seeded generators standing in for benchmark corpora.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, RawDataset};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Noise scale σ(x) of the heteroscedastic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseProfile {
    /// σ(x) = sigma everywhere; `sigma = 0` gives noiseless data.
    Constant { sigma: f64 },
    /// σ(x) = base + slope·x₁.
    Increasing { base: f64, slope: f64 },
    /// σ(x) = base + scale·x₁·x₂ (falls back to x₁² when d = 1).
    Interaction { base: f64, scale: f64 },
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile::Increasing { base: 0.1, slope: 1.0 }
    }
}

impl NoiseProfile {
    pub fn sigma(&self, x: &[f64]) -> f64 {
        match *self {
            NoiseProfile::Constant { sigma } => sigma,
            NoiseProfile::Increasing { base, slope } => base + slope * x[0],
            NoiseProfile::Interaction { base, scale } => {
                let second = x.get(1).copied().unwrap_or(x[0]);
                base + scale * x[0] * second
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// True noise scale σ(x) per row.
    pub sigma: Vec<f64>,
    /// Noiseless regression function g(x) per row.
    pub signal: Vec<f64>,
}

/// Regression function of the heteroscedastic generator:
/// g(x) = 2 sin(π x₁ x₂) + 4 (x₃ − ½)² + x₄ + ½ x₅ + Σ_{j>5} x_j / j,
/// with x₂ read as 1 and absent terms dropped when d is small.
pub fn regression_function(x: &[f64]) -> f64 {
    let x2 = x.get(1).copied().unwrap_or(1.0);
    let mut g = 2.0 * (PI * x[0] * x2).sin();
    if let Some(&x3) = x.get(2) {
        g += 4.0 * (x3 - 0.5) * (x3 - 0.5);
    }
    if let Some(&x4) = x.get(3) {
        g += x4;
    }
    if let Some(&x5) = x.get(4) {
        g += 0.5 * x5;
    }
    for (j, &v) in x.iter().enumerate().skip(5) {
        g += v / (j + 1) as f64;
    }
    g
}

/// X ~ U[0,1]^d, Y = g(X) + σ(X)·ε with ε ~ N(0,1).
pub fn synth_heteroscedastic(n: usize, d: usize, noise: NoiseProfile, seed: u64) -> SyntheticData {
    assert!(n >= 10 && d >= 1, "synthetic data needs n >= 10 and d >= 1");
    let mut rng = rng_from_seed(derive_seed(seed, stream::SYNTH));
    let mut features = Array2::zeros((n, d));
    let mut target = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    let mut row = vec![0.0; d];
    for i in 0..n {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = rng.random::<f64>();
            features[[i, j]] = *slot;
        }
        let g = regression_function(&row);
        let s = noise.sigma(&row);
        let eps: f64 = StandardNormal.sample(&mut rng);
        signal.push(g);
        sigma.push(s);
        target.push(g + s * eps);
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::new(features, target, names, "y").expect("shapes agree by construction");
    SyntheticData { dataset, sigma, signal }
}

pub const HOUSE_FEATURES: [&str; 7] = [
    "GrLivArea",
    "OverallQual",
    "CentralAir",
    "KitchenAbvGr",
    "BsmtQual",
    "KitchenQual",
    "GarageCars",
];

/// House-price-like data on raw scales: a skewed living-area column that
/// dominates the price, six correlated ordinal/binary attributes, and
/// log-scale noise that grows with living area and is larger for
/// high-end or atypical houses.
pub fn synth_house_prices(n: usize, seed: u64) -> RawDataset {
    let mut rng = rng_from_seed(derive_seed(seed, stream::SYNTH));
    let normal = |rng: &mut crate::rng::Rng| -> f64 { StandardNormal.sample(rng) };
    let mut features = Array2::zeros((n, HOUSE_FEATURES.len()));
    let mut target = Vec::with_capacity(n);
    for i in 0..n {
        let z_area = normal(&mut rng);
        let area = (7.27 + 0.33 * z_area).exp();
        let qual = (5.5 + 1.3 * z_area + 1.0 * normal(&mut rng)).round().clamp(1.0, 10.0);
        let air_p = 1.0 / (1.0 + (-(1.5 + 0.6 * (qual - 5.0))).exp());
        let central_air = f64::from(u8::from(rng.random::<f64>() < air_p));
        let u: f64 = rng.random();
        let kitchens = if u < 0.88 { 1.0 } else if u < 0.98 { 2.0 } else { 3.0 };
        let bsmt = (2.0 + 0.5 * (qual - 5.0) + 0.8 * normal(&mut rng)).round().clamp(0.0, 4.0);
        let kitchen_qual = (2.0 + 0.4 * (qual - 5.0) + 0.7 * normal(&mut rng)).round().clamp(1.0, 4.0);
        let garage = (1.8 + 0.7 * z_area + 0.3 * (qual - 5.0) + 0.6 * normal(&mut rng))
            .round()
            .clamp(0.0, 4.0);

        let log_sd = 0.04
            + 0.1 * (z_area + 0.5).max(0.0).powi(2)
            + 0.015 * (qual - 1.0)
            + 0.5 * (1.0 - central_air)
            + 0.4 * (kitchens - 1.0)
            + 0.08 * bsmt
            + 0.08 * (kitchen_qual - 1.0)
            + 0.03 * garage;
        let log_price = 12.0
            + 0.7 * (area / 1500.0).ln()
            + 0.06 * (qual - 5.0)
            + 0.08 * central_air
            - 0.08 * (kitchens - 1.0)
            + 0.02 * bsmt
            + 0.03 * kitchen_qual
            + 0.03 * garage
            + log_sd * normal(&mut rng);

        for (j, v) in [area.round(), qual, central_air, kitchens, bsmt, kitchen_qual, garage]
            .into_iter()
            .enumerate()
        {
            features[[i, j]] = v;
        }
        target.push(log_price.exp().round());
    }
    let names: Vec<String> = HOUSE_FEATURES.iter().map(|s| s.to_string()).collect();
    RawDataset::from_numeric(&features, &names, target, "SalePrice")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn zero_noise_is_exact() {
        let s = synth_heteroscedastic(50, 4, NoiseProfile::Constant { sigma: 0.0 }, 1);
        for (i, row) in s.dataset.features.rows().into_iter().enumerate() {
            assert_eq!(s.dataset.target[i], regression_function(row.as_slice().unwrap()));
        }
    }

    #[test]
    fn increasing_profile_is_heteroscedastic() {
        let s = synth_heteroscedastic(5000, 3, NoiseProfile::default(), 4);
        let mut rows: Vec<usize> = (0..5000).collect();
        rows.sort_by(|&a, &b| s.dataset.features[[a, 0]].total_cmp(&s.dataset.features[[b, 0]]));
        let resid = |range: &[usize]| {
            let r: Vec<f64> = range.iter().map(|&i| s.dataset.target[i] - s.signal[i]).collect();
            stats::variance(&r)
        };
        assert!(resid(&rows[4500..]) > resid(&rows[..500]));
    }

    #[test]
    fn deterministic() {
        let a = synth_heteroscedastic(30, 2, NoiseProfile::default(), 9);
        let b = synth_heteroscedastic(30, 2, NoiseProfile::default(), 9);
        assert_eq!(a, b);
        assert_eq!(synth_house_prices(40, 2), synth_house_prices(40, 2));
    }

    #[test]
    fn house_data_is_positive_and_skewed() {
        let raw = synth_house_prices(2000, 5);
        assert!(raw.target.iter().all(|&p| p > 0.0));
        let m = stats::mean(&raw.target);
        let mut sorted = raw.target.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(m > stats::quantile_sorted(&sorted, 0.5));
    }
}
