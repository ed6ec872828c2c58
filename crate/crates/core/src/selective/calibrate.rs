use crate::error::{Error, Result};
use crate::stats;

/// Threshold for target coverage `alpha`: the linear-interpolation
/// `alpha`-quantile of the calibration scores. Rows are accepted when
/// `score <= threshold`, so ties at the threshold are accepted and at least
/// `⌊(n−1)·alpha⌋ + 1` calibration rows pass.
pub fn calibrate_threshold(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    check_coverage(alpha)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("calibration scores"));
    }
    let mut scratch = scores.to_vec();
    Ok(stats::quantile_select(&mut scratch, alpha))
}

pub fn check_coverage(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("target coverage {alpha} not in (0, 1]")));
    }
    Ok(())
}

pub fn accepts(score: f64, threshold: f64) -> bool {
    score <= threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores_accept_everything() {
        let scores = [0.7; 25];
        for alpha in [0.1, 0.5, 0.99] {
            let tau = calibrate_threshold(&scores, alpha).unwrap();
            assert!(scores.iter().all(|&s| accepts(s, tau)));
        }
    }

    #[test]
    fn one_to_hundred_at_eighty_percent() {
        let scores: Vec<f64> = (1..=100).map(f64::from).collect();
        let tau = calibrate_threshold(&scores, 0.8).unwrap();
        let accepted = scores.iter().filter(|&&s| accepts(s, tau)).count();
        assert!(accepted >= 80);
        // Sort-and-count oracle: the 80th smallest score must pass, the 82nd must not.
        assert!(accepts(80.0, tau) && !accepts(82.0, tau));
    }

    #[test]
    fn full_coverage_is_max() {
        let scores = [3.0, -1.0, 8.5, 2.0];
        assert_eq!(calibrate_threshold(&scores, 1.0).unwrap(), 8.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(calibrate_threshold(&[], 0.5), Err(Error::EmptyCalibration)));
        assert!(calibrate_threshold(&[1.0], 0.0).is_err());
        assert!(calibrate_threshold(&[1.0], 1.5).is_err());
    }
}
