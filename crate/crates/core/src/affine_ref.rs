//! Finite-dimensional affine reference processes: an Ornstein–Uhlenbeck
//! process `dz = (b - βz)dt + √2 σ dB` and a Cox–Ingersoll–Ross process
//! `dy = (b - βy)dt + σ √(2y) dB`.
//!
//! Both have transforms `E exp(u x(t)) = exp(x0 ψ(t,u) + φ(t,u))`.

use crate::error::{domain, Error, Result};
use crate::exec;
use crate::rng;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffineKind {
    Ou,
    Cir,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    pub kind: AffineKind,
    /// Mean-reversion level numerator.
    pub b: f64,
    /// Reversion rate.
    pub beta: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl AffineModel {
    pub fn new(kind: AffineKind, b: f64, beta: f64, sigma: f64, x0: f64) -> Result<Self> {
        if !(beta > 0.0) || !(sigma > 0.0) {
            return domain("need beta > 0 and sigma > 0");
        }
        if kind == AffineKind::Cir && !(x0 >= 0.0) {
            return domain("CIR initial state must be non-negative");
        }
        Ok(Self { kind, b, beta, sigma, x0 })
    }

    /// `E x(t)` for either model (drift is affine in the state).
    pub fn mean(&self, t: f64) -> f64 {
        let e = (-self.beta * t).exp();
        self.x0 * e + self.b / self.beta * (1.0 - e)
    }
}

/// `(ψ(t,u), φ(t,u))` of the OU model in closed form.
pub fn ou_psi_phi(m: &AffineModel, t: f64, u: Complex64) -> (Complex64, Complex64) {
    let e1 = (-m.beta * t).exp();
    let e2 = (-2.0 * m.beta * t).exp();
    let psi = u * e1;
    let phi = u * (m.b / m.beta * (1.0 - e1)) + u * u * (m.sigma * m.sigma / (2.0 * m.beta) * (1.0 - e2));
    (psi, phi)
}

/// `E exp(u z(t))` for the OU model (characteristic function for imaginary `u`).
pub fn ou_transform(m: &AffineModel, t: f64, u: Complex64) -> Result<Complex64> {
    if m.kind != AffineKind::Ou {
        return domain("ou_transform needs an OU model");
    }
    let (psi, phi) = ou_psi_phi(m, t, u);
    Ok((psi * m.x0 + phi).exp())
}

/// Closed-form Riccati solution for the CIR model:
/// `ψ = u e^{-βt} / D`, `φ = -(b/σ²) ln D`, `D = 1 - (uσ²/β)(1 - e^{-βt})`.
pub fn cir_closed_form(m: &AffineModel, t: f64, u: f64) -> (f64, f64) {
    let s2 = m.sigma * m.sigma;
    let e = (-m.beta * t).exp();
    let d = 1.0 - u * s2 / m.beta * (1.0 - e);
    (u * e / d, -(m.b / s2) * d.ln())
}

/// Adaptive Dormand–Prince 5(4) integration of `ẋ = f(x)` for a small
/// autonomous system. Returns the state at `t`.
pub fn dormand_prince<const N: usize>(
    f: impl Fn(&[f64; N]) -> [f64; N],
    x0: [f64; N],
    t: f64,
    rtol: f64,
    atol: f64,
) -> Result<[f64; N]> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let _ = C;
    if t == 0.0 {
        return Ok(x0);
    }
    let mut x = x0;
    let mut s = 0.0;
    let mut h = (t * 1e-3).min(1e-2).max(1e-12);
    let mut steps = 0usize;
    while s < t {
        steps += 1;
        if steps > 1_000_000 {
            return Err(Error::Instability("Riccati integrator exceeded its step budget".into()));
        }
        if s + h > t {
            h = t - s;
        }
        let mut k = [[0.0; N]; 7];
        for i in 0..7 {
            let mut xi = x;
            for j in 0..i {
                for n in 0..N {
                    xi[n] += h * A[i][j] * k[j][n];
                }
            }
            k[i] = f(&xi);
        }
        let mut x5 = x;
        let mut err = 0.0f64;
        for n in 0..N {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for i in 0..7 {
                d5 += B5[i] * k[i][n];
                d4 += B4[i] * k[i][n];
            }
            x5[n] += h * d5;
            let sc = atol + rtol * x[n].abs().max(x5[n].abs());
            err = err.max((h * (d5 - d4)).abs() / sc);
        }
        if x5.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability("Riccati solution blew up".into()));
        }
        if err <= 1.0 {
            s += h;
            x = x5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(x)
}

/// `(ψ(t,u), φ(t,u))` for the CIR model from the Riccati system
/// `ψ̇ = -βψ + σ²ψ²`, `φ̇ = bψ`, `ψ(0) = u`, `φ(0) = 0`.
pub fn cir_psi_phi(m: &AffineModel, t: f64, u: f64) -> Result<(f64, f64)> {
    if u > 0.0 {
        // Blow-up is possible for u > 0; only the Laplace domain is supported.
        return domain("CIR transform is evaluated for u <= 0 only");
    }
    let (beta, s2, b) = (m.beta, m.sigma * m.sigma, m.b);
    let x = dormand_prince(|x: &[f64; 2]| [-beta * x[0] + s2 * x[0] * x[0], b * x[0]], [u, 0.0], t, 1e-12, 1e-15)?;
    Ok((x[0], x[1]))
}

/// `E exp(u y(t))` for the CIR model, `u <= 0`.
pub fn cir_transform(m: &AffineModel, t: f64, u: f64) -> Result<f64> {
    if m.kind != AffineKind::Cir {
        return domain("cir_transform needs a CIR model");
    }
    let (psi, phi) = cir_psi_phi(m, t, u)?;
    Ok((m.x0 * psi + phi).exp())
}

/// Terminal values of explicit Euler–Maruyama paths. The CIR scheme uses
/// full truncation: the negative part is zeroed inside drift and diffusion,
/// and the returned value is the positive part.
pub fn euler_maruyama(m: &AffineModel, dt: f64, horizon: f64, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return domain("need dt > 0 and horizon >= 0");
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    let h = if steps > 0 { horizon / steps as f64 } else { 0.0 };
    let sq = h.sqrt();
    let m = *m;
    Ok(exec::map_replicas(replicas, move |r| {
        let mut rng = rng::stream(seed, "euler-maruyama", r as u64);
        let mut x = m.x0;
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            match m.kind {
                AffineKind::Ou => {
                    x += (m.b - m.beta * x) * h + std::f64::consts::SQRT_2 * m.sigma * sq * z;
                }
                AffineKind::Cir => {
                    let xp = x.max(0.0);
                    x += (m.b - m.beta * xp) * h + m.sigma * (2.0 * xp).sqrt() * sq * z;
                }
            }
        }
        if m.kind == AffineKind::Cir { x.max(0.0) } else { x }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dormand_prince_exponential() {
        let x = dormand_prince(|x: &[f64; 1]| [-x[0]], [1.0], 2.0, 1e-12, 1e-15).unwrap();
        assert!((x[0] - (-2.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn cir_rejects_positive_u() {
        let m = AffineModel::new(AffineKind::Cir, 0.5, 1.0, 0.4, 1.0).unwrap();
        assert!(cir_transform(&m, 1.0, 0.3).is_err());
    }
}
