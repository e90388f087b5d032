//! Order statistics and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::least_squares;

/// Linear-interpolation quantile (type 7) of an unsorted sample.
pub fn quantile(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, level)
}

pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `value ≈ exp(intercept) · t^slope` over `[t_lo, t_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_lo: usize,
    pub t_hi: usize,
}

/// Least squares of `log value` on `log t` over points with `t ∈ [t_lo, t_hi]`.
pub fn rate_fit(ts: &[usize], values: &[f64], t_range: (usize, usize)) -> Result<RateFit> {
    if ts.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: ts.len(), got: values.len() });
    }
    let (t_lo, t_hi) = t_range;
    let (xs, ys): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= t_lo && t <= t_hi)
        .map(|(&t, &v)| ((t as f64).ln(), v))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points in [{t_lo}, {t_hi}], found {}", xs.len())));
    }
    if let Some(v) = ys.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("value {v} is not positive")));
    }
    let ys: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * ys.len() as f64 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, t_lo, t_hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.9), 7.0);
    }

    #[test]
    fn exact_power_law() {
        let ts: Vec<usize> = vec![1, 10, 100, 1000, 10000];
        let vals: Vec<f64> = ts.iter().map(|&t| 3.0 * (t as f64).powf(-0.4)).collect();
        let fit = rate_fit(&ts, &vals, (1, 10000)).unwrap();
        assert!((fit.slope + 0.4).abs() < 1e-10);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_and_errors() {
        let ts = [1, 2, 4, 8];
        let fit = rate_fit(&ts, &[2.0; 4], (1, 8)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(matches!(rate_fit(&ts, &[1.0, 0.0, 1.0, 1.0], (1, 8)), Err(Error::Fit(_))));
        assert!(matches!(rate_fit(&ts, &[1.0; 4], (4, 8)), Err(Error::Fit(_))));
    }
}
