//! Small estimators shared by the simulator, the oracles and the CLI.

use serde::Serialize;

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }

    /// `(mean - value) / se`.
    pub fn z(&self, value: f64) -> f64 {
        (self.mean - value) / self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` divisor.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean of i.i.d. observations.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    Estimate { mean: mean(xs), se: (variance(xs) / xs.len() as f64).sqrt() }
}

/// Least-squares slope of `y` on `x` with its classical standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Estimate {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Estimate { mean: slope, se: (rss / (n - 2.0) / sxx).sqrt() }
}

/// Trend of an autocorrelated series: the series is cut into `batches`
/// contiguous blocks and the slope of the block means against the block
/// index is estimated by least squares. The slope is per block.
pub fn batch_means_slope(series: &[f64], batches: usize) -> Estimate {
    assert!(batches >= 3 && series.len() >= batches);
    let size = series.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&series[b * size..(b + 1) * size])).collect();
    let index: Vec<f64> = (0..batches).map(|b| b as f64).collect();
    ols_slope(&index, &means)
}

/// `½ Σ |p_i − q_i|`; missing entries count as zero.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (at(p, i) - at(q, i)).abs()).sum::<f64>()
}

/// Normalises counts (or weights) into a probability vector.
pub fn normalise(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_se() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let s = ols_slope(&x, &y);
        assert!((s.mean - 2.0).abs() < 1e-12 && s.se < 1e-12);
    }

    #[test]
    fn batch_slope_scales_with_block_length() {
        let series: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let s = batch_means_slope(&series, 10);
        assert!((s.mean - 10.0).abs() < 1e-9);
    }

    #[test]
    fn tv_of_disjoint_supports() {
        assert_eq!(total_variation(&[1.0], &[0.0, 1.0]), 1.0);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn mean_estimate_of_constant() {
        let e = mean_estimate(&[2.0; 5]);
        assert_eq!((e.mean, e.se), (2.0, 0.0));
        assert!(e.covers(2.0, 3.0));
    }
}
