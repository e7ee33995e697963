//! Analytic moment formulas: annealed variance under a Brownian atom
//! catalyst, first and second moment densities of super-Brownian motion,
//! Neumann-series coefficients of its Laplace exponent, the fourth moment of
//! the field's `L²` norm, and a kurtosis certificate.
//!
//! Unless stated otherwise the catalyst motion here has generator `Δ`
//! (`kappa = 1`), while the annealed atom variance uses the field kernel of
//! `½Δ`.

use crate::error::{domain, Error, Result};
use crate::kernels::{gauss, GaussianBump};
use crate::quad::{integrate, integrate_line, QuadOptions};
use crate::stats::{self, Interval};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Annealed variance: finite value or divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AnnealedVariance {
    Finite(f64),
    Infinite,
}

impl AnnealedVariance {
    pub fn value(&self) -> f64 {
        match self {
            AnnealedVariance::Finite(v) => *v,
            AnnealedVariance::Infinite => f64::INFINITY,
        }
    }
}

/// `E ∫_0^t p²(t-s, x, B_s) ds` for a standard Brownian atom `B` and the
/// kernel of `½Δ` in `d` dimensions.
///
/// Averaging over `B_s ~ N(0, s)` gives the integrand
/// `(2π)^{-d} (τ(τ+2s))^{-d/2} exp(-|x|²/(τ+2s))`, `τ = t - s`, which is
/// integrable at `s = t` only for `d = 1`.
pub fn annealed_atom_variance(t: f64, x: &[f64]) -> Result<AnnealedVariance> {
    if !(t > 0.0) {
        return domain("annealed variance needs t > 0");
    }
    let d = x.len();
    if d == 0 {
        return domain("need at least one coordinate");
    }
    if d >= 2 {
        return Ok(AnnealedVariance::Infinite);
    }
    let x2 = x[0] * x[0];
    if x2 == 0.0 {
        // (1/2π) ∫_0^t (t² - s²)^{-1/2} ds = (1/2π)(π/2).
        return Ok(AnnealedVariance::Finite(0.25));
    }
    // Substituting τ = w² removes the endpoint singularity:
    // (1/π) ∫_0^{√t} (2t - w²)^{-1/2} exp(-x²/(2t - w²)) dw.
    let r = integrate(
        |w| {
            let q = 2.0 * t - w * w;
            (-x2 / q).exp() / q.sqrt() / PI
        },
        0.0,
        t.sqrt(),
        QuadOptions::with_tol(1e-12, 1e-10),
    )?;
    Ok(AnnealedVariance::Finite(r.value))
}

/// Initial condition of the catalyst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    Lebesgue,
    Delta0,
}

/// Density of `E Z_t(dx)`.
pub fn first_moment_density(t: f64, x: f64, initial: Initial, kappa: f64) -> Result<f64> {
    if !(t > 0.0) || !(kappa > 0.0) {
        return domain("need t > 0 and kappa > 0");
    }
    Ok(match initial {
        Initial::Lebesgue => 1.0,
        Initial::Delta0 => gauss(t, x * x, kappa, 1),
    })
}

/// Arguments of the second moment density (one spatial dimension).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub t1: f64,
    pub t2: f64,
    pub x1: f64,
    pub x2: f64,
    pub initial: Initial,
    pub kappa: f64,
}

impl MomentQuery {
    pub fn new(t1: f64, t2: f64, x1: f64, x2: f64, initial: Initial) -> Self {
        Self { t1, t2, x1, x2, initial, kappa: 1.0 }
    }

    /// Same query with `(t1, x1)` the earlier of the two space-time points.
    fn ordered(&self) -> Self {
        if self.t1 <= self.t2 {
            *self
        } else {
            Self { t1: self.t2, t2: self.t1, x1: self.x2, x2: self.x1, ..*self }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t2 > 0.0) || !(self.kappa > 0.0) {
            return domain("moment query needs positive times and kappa");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentValue {
    pub value: f64,
    pub error: f64,
}

/// `∫ p(a,0,y) p(b,y,x1) p(c,y,x2) dy` in closed form:
/// `p(b+c, x1, x2) · p(a + bc/(b+c), 0, (c x1 + b x2)/(b+c))`.
pub fn gaussian_triple(a: f64, b: f64, c: f64, x1: f64, x2: f64, kappa: f64) -> f64 {
    let bc = b + c;
    let m = (c * x1 + b * x2) / bc;
    gauss(bc, (x1 - x2).powi(2), kappa, 1) * gauss(a + b * c / bc, m * m, kappa, 1)
}

/// The same integral by quadrature over `y`, on a window around the peak
/// of the Gaussian product.
fn triple_by_quadrature(a: f64, b: f64, c: f64, x1: f64, x2: f64, kappa: f64) -> Result<f64> {
    let (pa, pb, pc) = (1.0 / a, 1.0 / b, 1.0 / c);
    let prec = pa + pb + pc;
    let mean = (pb * x1 + pc * x2) / prec;
    let sd = (2.0 * kappa / prec).sqrt();
    let r = integrate(
        |y| gauss(a, y * y, kappa, 1) * gauss(b, (y - x1).powi(2), kappa, 1) * gauss(c, (y - x2).powi(2), kappa, 1),
        mean - 14.0 * sd,
        mean + 14.0 * sd,
        QuadOptions::with_tol(1e-13, 1e-10),
    )?;
    Ok(r.value)
}

/// Branching (genealogical) part `D` of the second moment measure:
/// `E[Z_{t1}(dx1) Z_{t2}(dx2)] = M_{t1}(dx1) M_{t2}(dx2) + 2 D`.
///
/// * Lebesgue start: `D = ∫_0^{t1} p(2s + t2 - t1, x1, x2) ds`.
/// * `δ0` start: `D = ∫_0^{t1} ∫ p(s,0,y) p(t1-s,y,x1) p(t2-s,y,x2) dy ds`,
///   with the `y` integral done by quadrature.
///
/// `t1 <= t2` is not required; the query is reordered.
pub fn second_moment_density(q: &MomentQuery) -> Result<MomentValue> {
    second_moment_density_smoothed(q, 0.0)
}

/// [`second_moment_density`] after convolving both points with `p(h2, ·, ·)`.
pub fn second_moment_density_smoothed(q: &MomentQuery, h2: f64) -> Result<MomentValue> {
    q.validate()?;
    if !(h2 >= 0.0) {
        return domain("smoothing variance must be non-negative");
    }
    let q = q.ordered();
    let (t1, t2, k) = (q.t1, q.t2, q.kappa);
    let dx2 = (q.x1 - q.x2).powi(2);
    let opts = QuadOptions::with_tol(1e-12, 1e-9);
    // s = t1 - w² in both cases keeps the integrand bounded at s = t1.
    let r = match q.initial {
        Initial::Lebesgue => integrate(
            |w| 2.0 * w * gauss(2.0 * w * w + (t2 - t1) + 2.0 * h2, dx2, k, 1),
            0.0,
            t1.sqrt(),
            opts,
        )?,
        Initial::Delta0 => {
            let f = |w: f64| -> f64 {
                let s = t1 - w * w;
                if s <= 0.0 {
                    return 0.0;
                }
                let b = w * w + h2;
                let c = t2 - t1 + w * w + h2;
                if b <= 0.0 || c <= 0.0 {
                    // Only at w = 0, where the 2w factor vanishes.
                    return 0.0;
                }
                2.0 * w * triple_by_quadrature(s, b, c, q.x1, q.x2, k).unwrap_or(f64::NAN)
            };
            integrate(f, 0.0, t1.sqrt(), opts)?
        }
    };
    Ok(MomentValue { value: r.value, error: r.error })
}

/// Second moment `E[⟨p(h², x1, ·), Z_{t1}⟩ ⟨p(h², x2, ·), Z_{t2}⟩]` of the
/// particle system that starts from `N` particles of mass `1/N` at the
/// origin. Independence across ancestors gives `(1 - 1/N)` times the mean
/// product, plus the branching part `2D`, plus `1/N` times the term in which
/// the later point descends from the earlier particle itself.
pub fn particle_pair_moment(q: &MomentQuery, h2: f64, n_scale: usize) -> Result<MomentValue> {
    if q.initial != Initial::Delta0 {
        return domain("particle pair moments are defined for a point-mass start");
    }
    let q = q.ordered();
    let k = q.kappa;
    let mean = gauss(q.t1 + h2, q.x1 * q.x1, k, 1) * gauss(q.t2 + h2, q.x2 * q.x2, k, 1);
    let d = second_moment_density_smoothed(&q, h2)?;
    let self_term = if h2 > 0.0 {
        gaussian_triple(q.t1, h2, q.t2 - q.t1 + h2, q.x1, q.x2, k)
    } else {
        0.0
    };
    let inv_n = 1.0 / n_scale as f64;
    Ok(MomentValue { value: (1.0 - inv_n) * mean + 2.0 * d.value + inv_n * self_term, error: 2.0 * d.error })
}

/// Total correlation mass `∫∫ D(dx1, dx2) = min(t1, t2)` for a unit point
/// mass start.
pub fn integrated_second_moment(t1: f64, t2: f64) -> Result<f64> {
    if !(t1 >= 0.0 && t2 >= 0.0) {
        return domain("times must be non-negative");
    }
    Ok(t1.min(t2))
}

/// `c1 = ∫ p(t, 0, y) φ(y) dy` for a unit point mass at 0.
pub fn neumann_c1(t: f64, phi: &GaussianBump, kappa: f64) -> f64 {
    phi.heat_convolve(t, 0.0, kappa)
}

/// `(T_s φ)(y)² = w² (4πv)^{-1/2} N(y; c, v/2)` with `v = σ² + 2κs`:
/// returns `(prefactor, variance v/2)`.
fn squared_bump(phi: &GaussianBump, s: f64, kappa: f64) -> (f64, f64) {
    let v = phi.width * phi.width + 2.0 * kappa * s;
    (phi.weight * phi.weight / (4.0 * PI * v).sqrt(), 0.5 * v)
}

fn normal_pdf(x: f64, m: f64, v: f64) -> f64 {
    (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// `c2 = ∫_0^t ∫ p(t-s, 0, y) (T_s φ)(y)² dy ds`; `Var⟨φ, Z_t⟩ = 2 c2`.
pub fn neumann_c2(t: f64, phi: &GaussianBump, kappa: f64) -> Result<f64> {
    let r = integrate(
        |s| {
            let (pre, v) = squared_bump(phi, s, kappa);
            pre * normal_pdf(0.0, phi.center, v + 2.0 * kappa * (t - s))
        },
        0.0,
        t,
        QuadOptions::with_tol(1e-12, 1e-10),
    )?;
    Ok(r.value)
}

/// Fourth-order coefficient of the Neumann expansion, evaluated as written
/// in the iteration (outer kernel from 0, inner bracket squared). Used only
/// as a finiteness/positivity smoke test.
pub fn neumann_c4(t: f64, phi: &GaussianBump, kappa: f64) -> Result<f64> {
    let opts = QuadOptions::with_tol(1e-8, 1e-6);
    let bracket = |s: f64, w: f64| -> Result<f64> {
        let (pre, v) = squared_bump(phi, s, kappa);
        Ok(integrate(|s1| pre * normal_pdf(w, phi.center, v + 2.0 * kappa * (s - s1)), 0.0, s, opts)?.value)
    };
    let outer = |s: f64| -> f64 {
        let f = |w: f64| gauss(t - s, w * w, kappa, 1) * bracket(s, w).map(|b| b * b).unwrap_or(f64::NAN);
        let sd = (2.0 * kappa * (t - s)).sqrt();
        integrate(f, -12.0 * sd - 12.0, 12.0 * sd + 12.0, opts).map(|r| r.value).unwrap_or(f64::NAN)
    };
    let r = integrate(outer, 0.0, t, opts)?;
    Ok(r.value)
}

/// Terms of `E‖X_t‖⁴_{L²}` for a unit point-mass catalyst start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourthMoment {
    pub value: f64,
    /// `E[(∫_0^t ⟨1, Z_s⟩ C (t-s)^{-1/2} ds)²]`.
    pub squared_mean_term: f64,
    /// `2 ∫∫ p²(2t-s1-s2, y1, y2) E[Z_{s1}(dy1) Z_{s2}(dy2)] ds1 ds2`.
    pub trace_term: f64,
    /// Part of `trace_term` coming from the product of first moments.
    pub trace_mean_part: f64,
    /// The same integral against the ancestor-descendant (self) measure
    /// `p(s1, 0, y1) p(s2 - s1, y1, y2)` of a particle system.
    pub trace_self_part: f64,
    /// `C = ∫ p(1, x, y)² dx`, so that `∫ p(τ, x, y)² dx = C τ^{-1/2}`.
    pub c_const: f64,
    pub error: f64,
}

impl FourthMoment {
    /// `E‖X_t‖⁴` when the catalyst is the particle system of `N` particles
    /// of mass `1/N` started at the origin: the first-moment product is
    /// weighted by `1 - 1/N` and the self term enters with weight `1/N`.
    /// The total mass law, hence `squared_mean_term`, is unchanged.
    pub fn particle_value(&self, n_scale: usize) -> f64 {
        let inv = 1.0 / n_scale as f64;
        self.value + inv * (self.trace_self_part - self.trace_mean_part)
    }
}

/// Fourth moment of the `L²(ℝ)` norm of the field (generator `κΔ` for both
/// the catalyst and the field) by nested quadrature.
///
/// Conditionally on `Z`, `‖X_t‖²` is a Gaussian quadratic form, so
/// `E‖X_t‖⁴ = E[(E[‖X_t‖² | Z])²] + 2 E‖Γ_t‖²_{HS}`. Both terms reduce to
/// double time integrals against the catalyst's second moment measure.
pub fn fourth_moment_l2(t: f64, kappa: f64) -> Result<FourthMoment> {
    if !(t > 0.0) || !(kappa > 0.0) {
        return domain("need t > 0 and kappa > 0");
    }
    let opts = QuadOptions::with_tol(1e-12, 1e-10);
    let c = integrate_line(|x| gauss(1.0, x * x, kappa, 1).powi(2), opts)?.value;
    let rt = t.sqrt();
    let inner = QuadOptions::with_tol(1e-13, 1e-11);
    let outer = QuadOptions::with_tol(1e-11, 1e-9);
    // s_i = t - w_i²: ds = 2w dw and (t - s)^{-1/2} = 1/w.
    let first = integrate(
        |w1| {
            let s1 = t - w1 * w1;
            integrate(
                |w2| {
                    let s2 = t - w2 * w2;
                    let m = integrated_second_moment(s1, s2).unwrap_or(0.0);
                    4.0 * c * c * (1.0 + 2.0 * m)
                },
                0.0,
                rt,
                inner,
            )
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
        },
        0.0,
        rt,
        outer,
    )?;
    let a4 = 4.0 * PI * kappa;
    // Parts of the trace integrand: first-moment product, branching
    // covariance and particle self term, each against 2 p²(τ, y1, y2).
    let part = |which: usize| {
        integrate(
            |w1| {
                let s1 = t - w1 * w1;
                let f = |w2: f64| {
                    let s2 = t - w2 * w2;
                    let tau = w1 * w1 + w2 * w2;
                    if tau == 0.0 {
                        return 0.0;
                    }
                    // ∫ p²(τ, y1, y2) g = (8πκτ)^{-1/2} ∫ p(τ/2, y1, y2) g.
                    let pref = (2.0 * a4 * tau).powf(-0.5);
                    let a = (s2 - s1).abs() + 0.5 * tau;
                    let g = match which {
                        0 => (a4 * (t + 0.5 * (s1 + s2))).powf(-0.5),
                        1 => 2.0 * a4.powf(-0.5) * ((2.0 * s1.min(s2) + a).sqrt() - a.sqrt()),
                        _ => (a4 * a).powf(-0.5),
                    };
                    4.0 * w1 * w2 * 2.0 * pref * g
                };
                // The integrand has a kink on the diagonal s1 = s2.
                let lo = integrate(f, 0.0, w1, inner);
                let hi = integrate(f, w1, rt, inner);
                match (lo, hi) {
                    (Ok(a), Ok(b)) => a.value + b.value,
                    _ => f64::NAN,
                }
            },
            0.0,
            rt,
            outer,
        )
    };
    let mean_part = part(0)?;
    let cov_part = part(1)?;
    let self_part = part(2)?;
    Ok(FourthMoment {
        value: first.value + mean_part.value + cov_part.value,
        squared_mean_term: first.value,
        trace_term: mean_part.value + cov_part.value,
        trace_mean_part: mean_part.value,
        trace_self_part: self_part.value,
        c_const: c,
        error: first.error + mean_part.error + cov_part.error,
    })
}

/// Excess kurtosis with a bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KurtosisCertificate {
    pub n: usize,
    pub excess_kurtosis: f64,
    pub ci95: Interval,
    /// True iff the interval lies strictly above zero.
    pub leptokurtic: bool,
}

/// Minimum sample count accepted by [`leptokurtosis_certificate`].
pub const MIN_KURTOSIS_SAMPLES: usize = 10_000;

/// k-statistic excess kurtosis `k4/k2²` with a percentile bootstrap CI
/// (1000 resamples, seeded).
pub fn leptokurtosis_certificate(samples: &[f64], seed: u64) -> Result<KurtosisCertificate> {
    if samples.len() < MIN_KURTOSIS_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_KURTOSIS_SAMPLES, got: samples.len() });
    }
    let k = stats::kstats(samples)?;
    if k.k2 <= 0.0 {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let ci = stats::bootstrap_ci(
        samples,
        |x| stats::kstats(x).map(|k| k.excess_kurtosis()).unwrap_or(f64::NAN),
        1000,
        0.95,
        seed,
    );
    Ok(KurtosisCertificate { n: samples.len(), excess_kurtosis: k.excess_kurtosis(), ci95: ci, leptokurtic: ci.lo > 0.0 })
}

/// Excess kurtosis of a centred Gaussian variance mixture
/// `Σ p_i N(0, v_i)`: `3 E[V²]/E[V]² - 3`.
pub fn variance_mixture_kurtosis(probs: &[f64], variances: &[f64]) -> f64 {
    let m1: f64 = probs.iter().zip(variances).map(|(p, v)| p * v).sum();
    let m2: f64 = probs.iter().zip(variances).map(|(p, v)| p * v * v).sum();
    3.0 * m2 / (m1 * m1) - 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_closed_form_matches_quadrature() {
        for &(a, b, c, x1, x2) in &[(0.5, 0.2, 0.7, 0.1, -0.3), (1.0, 1e-3, 0.5, 0.0, 0.4), (0.01, 0.3, 0.3, 1.0, 1.0)] {
            let cf = gaussian_triple(a, b, c, x1, x2, 1.0);
            let q = triple_by_quadrature(a, b, c, x1, x2, 1.0).unwrap();
            assert!((cf - q).abs() < 1e-10 * cf.max(1.0), "{cf} {q}");
        }
    }

    #[test]
    fn lebesgue_diagonal_value() {
        let v = second_moment_density(&MomentQuery::new(1.0, 1.0, 0.0, 0.0, Initial::Lebesgue)).unwrap();
        assert!((v.value - (2.0 * PI).powf(-0.5)).abs() < 1e-9);
    }

    #[test]
    fn mixture_kurtosis() {
        // Equal mixture of variances 1 and 3: 3·5/4 - 3 = 0.75.
        assert!((variance_mixture_kurtosis(&[0.5, 0.5], &[1.0, 3.0]) - 0.75).abs() < 1e-15);
    }
}
