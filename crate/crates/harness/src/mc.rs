//! Monte Carlo sample summaries used by the checks.

use catalytic_ou::stats::{self, Interval};
use serde::Serialize;

/// Mean, standard error, normal and bootstrap intervals, skewness and
/// excess kurtosis (k-statistics) of a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub ci95: Interval,
    /// Percentile bootstrap interval for the mean (1000 resamples).
    pub bootstrap_ci95: Interval,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub zero_variance: bool,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Summarises at least two samples. Constant samples get `se = 0`, the
/// zero-variance flag and degenerate intervals.
pub fn mc_summary(samples: &[f64], seed: u64) -> catalytic_ou::Result<McSummary> {
    let s = stats::summarize(samples)?;
    let bootstrap_ci95 = if s.zero_variance {
        Interval { lo: s.mean, hi: s.mean }
    } else {
        stats::bootstrap_ci(samples, stats::mean, BOOTSTRAP_RESAMPLES, 0.95, seed)
    };
    Ok(McSummary {
        n: s.n,
        mean: s.mean,
        variance: s.variance,
        se: s.se,
        ci95: s.ci95,
        bootstrap_ci95,
        skewness: s.skewness,
        excess_kurtosis: s.excess_kurtosis,
        zero_variance: s.zero_variance,
    })
}

/// Standard error of the unbiased sample variance,
/// `sqrt((m4 - s⁴ (n-3)/(n-1)) / n)`.
pub fn variance_se(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let m = stats::mean(samples);
    let s2 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}
