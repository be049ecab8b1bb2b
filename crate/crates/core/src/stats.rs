//! Summary statistics with deterministic reduction order.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Monte Carlo estimate with standard error and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub label: String,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replicates)`.
    pub stderr: f64,
    pub replicates: usize,
    pub master_seed: u64,
}

impl EstimateCI {
    /// Summarises `samples` in slice order; needs at least two samples.
    pub fn from_samples(label: impl Into<String>, samples: &[f64], master_seed: u64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("a standard error needs at least two replicates"));
        }
        let (mean, var) = mean_var(samples);
        Ok(Self {
            label: label.into(),
            mean,
            stderr: (var / samples.len() as f64).sqrt(),
            replicates: samples.len(),
            master_seed,
        })
    }

    /// `(self - other) / sqrt(se_1^2 + se_2^2)`, zero when both are exact.
    pub fn z_against(&self, other: &EstimateCI) -> f64 {
        z_score(self.mean - other.mean, self.stderr.hypot(other.stderr))
    }

    /// Whether `value` lies within `k` standard errors.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// `diff / se`, treating `0 / 0` as 0.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / se
    }
}

/// Mean and unbiased variance, two-pass.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Sample covariance, two-pass.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (n - 1.0)
}

/// Linear-interpolated quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Inflated by `sqrt(χ²/(n-2))` when the weighted residuals exceed their
    /// nominal scale.
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Weighted least squares of `y` on `x`; `weights = None` is ordinary least
/// squares.
pub fn linear_fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || weights.is_some_and(|w| w.len() != n) {
        return Err(invalid("fit inputs differ in length"));
    }
    if n < 2 {
        return Err(Error::IllConditioned("need at least two points".into()));
    }
    let ones = vec![1.0; n];
    let w = weights.unwrap_or(&ones);
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let syy: f64 = w.iter().zip(y).map(|(w, y)| w * (y - ym) * (y - ym)).sum();
    if sxx <= 0.0 {
        return Err(Error::IllConditioned("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
    let chi2: f64 = (0..n).map(|i| w[i] * residuals[i] * residuals[i]).sum();
    let dof = n.saturating_sub(2).max(1) as f64;
    let slope_stderr = if weights.is_some() {
        ((chi2 / dof).max(1.0) / sxx).sqrt()
    } else {
        (chi2 / dof / sxx).sqrt()
    };
    let r_squared = if syy > 0.0 { 1.0 - chi2 / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        residuals,
    })
}
