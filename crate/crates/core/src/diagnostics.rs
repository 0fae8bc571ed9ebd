//! Residual statistics used to judge innovations estimates and filters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Sample autocorrelation at lags `1..=max_lag`, normalized by lag 0.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (1..=max_lag)
        .map(|k| {
            if k >= n || c0 == 0.0 {
                return 0.0;
            }
            let ck: f64 = (0..n - k).map(|t| (x[t] - mean) * (x[t + k] - mean)).sum();
            ck / c0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenessReport {
    pub max_lag: usize,
    /// ±3/√N band.
    pub bound: f64,
    /// Per channel: fraction of lags whose autocorrelation lies inside the band.
    pub fraction_within: Vec<f64>,
    pub required_fraction: f64,
    pub passes: bool,
}

/// Band test on every row of `signals` (channels × samples).
pub fn whiteness(signals: &DMatrix<f64>, max_lag: usize, required_fraction: f64) -> WhitenessReport {
    let n = signals.ncols();
    let bound = 3.0 / (n as f64).sqrt();
    let fraction_within: Vec<f64> = (0..signals.nrows())
        .map(|i| {
            let row: Vec<f64> = signals.row(i).iter().cloned().collect();
            let ac = autocorrelation(&row, max_lag);
            ac.iter().filter(|r| r.abs() <= bound).count() as f64 / max_lag as f64
        })
        .collect();
    let passes = fraction_within.iter().all(|&f| f >= required_fraction);
    WhitenessReport {
        max_lag,
        bound,
        fraction_within,
        required_fraction,
        passes,
    }
}

/// Pearson correlation of two equally long sequences.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "correlation of unequal lengths");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Per-row correlation between two equally shaped signal matrices.
pub fn channel_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(a.shape(), b.shape(), "channel correlation of unequal shapes");
    (0..a.nrows())
        .map(|i| {
            let ra: Vec<f64> = a.row(i).iter().cloned().collect();
            let rb: Vec<f64> = b.row(i).iter().cloned().collect();
            correlation(&ra, &rb)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_signal_has_negative_lag_one() {
        let x: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ac = autocorrelation(&x, 2);
        assert!((ac[0] + 0.99).abs() < 1e-12);
        assert!((ac[1] - 0.98).abs() < 1e-12);
    }

    #[test]
    fn correlation_of_affine_copy_is_one() {
        let a = [1.0, 2.0, 4.0, 8.0];
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((correlation(&a, &b) - 1.0).abs() < 1e-14);
        let c: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((correlation(&a, &c) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_walk_is_not_white() {
        let mut acc = 0.0;
        let walk: Vec<f64> = (0..500)
            .map(|k| {
                acc += ((k * 7919) % 13) as f64 - 6.0;
                acc
            })
            .collect();
        let m = DMatrix::from_row_slice(1, walk.len(), &walk);
        assert!(!whiteness(&m, 20, 0.95).passes);
    }
}
