//! Small statistical helpers: exponential decay fits, batch-means and
//! binomial intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// One point `(x, count, total)` of an empirical tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub x: f64,
    pub count: u64,
    pub total: u64,
}

impl DecayPoint {
    pub fn new(x: f64, count: u64, total: u64) -> Self {
        DecayPoint { x, count, total }
    }
}

/// Weighted least-squares fit of `-ln P̂` against `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub slope_ci: (f64, f64),
    /// Number of points with a nonzero count used in the fit.
    pub used: usize,
    /// `(x, -ln(3/total))` for every zero-count point: a 95% lower bound on
    /// `-ln P` at that `x`.
    pub rule_of_three: Vec<(f64, f64)>,
}

impl DecayFit {
    /// 95% interval excludes zero from above.
    pub fn significantly_positive(&self) -> bool {
        self.slope_ci.0 > 0.0
    }
}

/// Fits `-ln(count/total) = intercept + slope * x`.
///
/// Weights are inverse delta-method variances `count / (1 - p̂)`. The slope
/// standard error uses those variances, inflated by the reduced chi-square
/// of the residuals when that exceeds one. Zero-count points are excluded
/// and reported with their rule-of-three bounds.
pub fn fit_exponential_decay(points: &[DecayPoint]) -> Result<DecayFit> {
    let rule_of_three: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.count == 0 && p.total > 0)
        .map(|p| (p.x, -(3.0 / p.total as f64).min(1.0).ln()))
        .collect();
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.count > 0 && p.total > 0)
        .map(|p| {
            let phat = p.count as f64 / p.total as f64;
            // An all-events point carries only the information of one more trial.
            let var = ((1.0 - phat) / p.count as f64).max(1.0 / (p.total as f64 * p.total as f64));
            (p.x, -phat.ln(), 1.0 / var)
        })
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientEvents {
            usable: usable.len(),
            rule_of_three,
        });
    }
    let sw: f64 = usable.iter().map(|u| u.2).sum();
    let xm = usable.iter().map(|u| u.2 * u.0).sum::<f64>() / sw;
    let ym = usable.iter().map(|u| u.2 * u.1).sum::<f64>() / sw;
    let sxx: f64 = usable.iter().map(|u| u.2 * (u.0 - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "all usable points share the same x".into(),
        });
    }
    let sxy: f64 = usable.iter().map(|u| u.2 * (u.0 - xm) * (u.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let k = usable.len();
    let chi2: f64 = usable
        .iter()
        .map(|u| u.2 * (u.1 - intercept - slope * u.0).powi(2))
        .sum();
    let dispersion = if k > 2 { (chi2 / (k - 2) as f64).max(1.0) } else { 1.0 };
    let slope_se = (dispersion / sxx).sqrt();
    Ok(DecayFit {
        slope,
        intercept,
        slope_se,
        slope_ci: (slope - Z95 * slope_se, slope + Z95 * slope_se),
        used: k,
        rule_of_three,
    })
}

/// Mean with a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }

    pub fn point(x: f64) -> Self {
        Interval { mean: x, lo: x, hi: x }
    }
}

/// 95% batch-means interval: the values (in replica order) are split into
/// `batches` contiguous groups and a Student-t interval is built from the
/// group means. With fewer than two values the interval is unbounded.
pub fn batch_means(values: &[f64], batches: usize) -> Interval {
    let n = values.len();
    if n == 0 {
        return Interval {
            mean: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.min(n);
    if b < 2 {
        return Interval {
            mean,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
    }
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let chunk = &values[i * n / b..(i + 1) * n / b];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let bm = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (b - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (b - 1) as f64)
        .map(|s| s.inverse_cdf(0.975))
        .unwrap_or(Z95);
    let hw = t * (var / b as f64).sqrt();
    Interval {
        mean,
        lo: mean - hw,
        hi: mean + hw,
    }
}

/// Sample mean with a normal 95% interval from the sample variance.
pub fn mean_interval(values: &[f64]) -> Interval {
    let n = values.len();
    if n == 0 {
        return Interval {
            mean: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Interval {
            mean,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let hw = Z95 * (var / n as f64).sqrt();
    Interval {
        mean,
        lo: mean - hw,
        hi: mean + hw,
    }
}

/// Standard error of a binomial frequency.
pub fn binomial_se(count: u64, total: u64) -> f64 {
    if total == 0 {
        return f64::NAN;
    }
    let p = count as f64 / total as f64;
    (p * (1.0 - p) / total as f64).sqrt()
}

/// Wilson 95% interval for a binomial proportion.
pub fn wilson_interval(count: u64, total: u64) -> Interval {
    if total == 0 {
        return Interval {
            mean: f64::NAN,
            lo: 0.0,
            hi: 1.0,
        };
    }
    let n = total as f64;
    let p = count as f64 / n;
    let z2 = Z95 * Z95;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let hw = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    // The bounds are exactly 0 and 1 at the extremes; avoid rounding residue.
    let lo = if count == 0 { 0.0 } else { (center - hw).max(0.0) };
    let hi = if count == total { 1.0 } else { (center + hw).min(1.0) };
    Interval { mean: p, lo, hi }
}
