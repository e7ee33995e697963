//! Sample statistics: moments, k-statistics, bootstrap intervals and
//! least-squares slopes.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    /// Normal-theory 95% interval for the mean.
    pub ci95: Interval,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub zero_variance: bool,
}

/// Unbiased cumulant estimates (k-statistics) up to order four.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStats {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl KStats {
    pub fn skewness(&self) -> f64 {
        if self.k2 > 0.0 { self.k3 / self.k2.powf(1.5) } else { 0.0 }
    }
    pub fn excess_kurtosis(&self) -> f64 {
        if self.k2 > 0.0 { self.k4 / (self.k2 * self.k2) } else { 0.0 }
    }
}

pub fn kstats(x: &[f64]) -> Result<KStats> {
    let n = x.len();
    if n < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: n });
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let k2 = nf / (nf - 1.0) * m2;
    let k3 = nf * nf / ((nf - 1.0) * (nf - 2.0)) * m3;
    let k4 = nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2)
        / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    Ok(KStats { k1: mean, k2, k3, k4 })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn summarize(x: &[f64]) -> Result<Summary> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let (m, se) = mean_se(x);
    let variance = se * se * n as f64;
    let zero_variance = x.iter().all(|&v| v == x[0]);
    let (skewness, excess_kurtosis) = if n >= 4 && !zero_variance {
        let k = kstats(x)?;
        (k.skewness(), k.excess_kurtosis())
    } else {
        (0.0, 0.0)
    };
    Ok(Summary {
        n,
        mean: m,
        variance,
        se,
        ci95: Interval { lo: m - 1.96 * se, hi: m + 1.96 * se },
        skewness,
        excess_kurtosis,
        zero_variance,
    })
}

/// Percentile bootstrap interval for `stat` at the given two-sided level.
pub fn bootstrap_ci<F>(x: &[f64], stat: F, resamples: usize, level: f64, seed: u64) -> Interval
where
    F: Fn(&[f64]) -> f64,
{
    let mut rng = rng::stream(seed, "bootstrap", 0);
    let n = x.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = x[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    Interval { lo: quantile_sorted(&stats, alpha), hi: quantile_sorted(&stats, 1.0 - alpha) }
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < s.len() { s[i] * (1.0 - f) + s[i + 1] * f } else { s[s.len() - 1] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    LineFit { slope, intercept, rms }
}

/// Fit of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// z-score of an estimate against a target; zero when both coincide and the
/// standard error vanishes.
pub fn z_score(estimate: f64, target: f64, se: f64) -> f64 {
    let d = estimate - target;
    if se > 0.0 {
        d / se
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kstats_of_small_sample() {
        // Hand-computed: x = 1,2,3,4,10.
        let k = kstats(&[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap();
        assert!((k.k1 - 4.0).abs() < 1e-12);
        assert!((k.k2 - 12.5).abs() < 1e-12);
        // m3 = (−27 −8 −1 + 0 + 216)/5 = 36, k3 = 25/12 * 36 = 75.
        assert!((k.k3 - 75.0).abs() < 1e-10);
    }

    #[test]
    fn constant_samples_flag_zero_variance() {
        let s = summarize(&[1.0; 4]).unwrap();
        assert!(s.zero_variance);
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.se, 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys);
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
    }
}
