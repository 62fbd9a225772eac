//! Small sample-statistics helpers for ensemble estimates.

use serde::{Deserialize, Serialize};

/// Mean and variance of a sample with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// Standard error of the variance estimate from the sample fourth moment.
    pub se_variance: f64,
}

impl Summary {
    pub fn of(sample: &[f64]) -> Self {
        let n = sample.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
                se_mean: f64::NAN,
                se_variance: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = sample.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for v in sample {
            let d = (v - mean) * (v - mean);
            m2 += d;
            m4 += d * d;
        }
        let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        let pop_var = m2 / nf;
        Self {
            n,
            mean,
            variance,
            se_mean: (variance / nf).sqrt(),
            se_variance: ((m4 / nf - pop_var * pop_var).max(0.0) / nf).sqrt(),
        }
    }
}

/// Sample covariance and its standard error.
pub fn covariance(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len().min(y.len());
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let prods: Vec<f64> = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).collect();
    let s = Summary::of(&prods);
    (s.mean * nf / (nf - 1.0), s.se_mean)
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let slope_se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit {
        slope,
        intercept,
        slope_se,
    }
}
