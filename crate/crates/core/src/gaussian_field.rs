//! Quenched analysis of the catalytic Ornstein–Uhlenbeck field: covariance
//! of the stochastic convolution given a catalyst path, Gaussian sampling,
//! the Dirichlet eigenmode representation on `[0, 1]^d`, negative Sobolev
//! norms and Hölder exponent estimates.
//!
//! Between two recorded catalyst states the catalyst is taken to be the
//! linear interpolation (mixture) of the two particle measures. Time
//! integrals of kernel products against that interpolant are evaluated in
//! closed form, so the integrable singularity at `s = t` costs nothing.

use crate::error::{domain, Error, Result};
use crate::exec;
use crate::kernels::{EigenSystem, HeatKernelParams, HeatPropagator, PeriodicGrid};
use crate::rng::{self, StreamRng};
use crate::special::e1;
use crate::stats::{self, Interval, LineFit};
use crate::superprocess::{CatalystKind, CatalystPath, ParticleMeasure};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::PI;

/// Symmetric covariance matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchedCovariance {
    pub dim: usize,
    /// Evaluation points, `d` coordinates each (empty for mode covariances).
    pub points: Vec<f64>,
    pub matrix: Vec<f64>,
    pub t: f64,
    pub kappa: f64,
    pub path_seed: Option<u64>,
}

impl QuenchedCovariance {
    pub fn from_matrix(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return domain("matrix size does not match dimension");
        }
        Ok(Self { dim, points: Vec::new(), matrix, t: 0.0, kappa: 0.0, path_seed: None })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Smallest eigenvalue; `>= -1e-10 trace` counts as positive semidefinite.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.matrix);
        SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-10 * self.trace().abs()
    }
}

/// `∫ τ^{-1} e^{-B/τ} dτ` over `[ta, tb]` (B > 0 or ta > 0).
fn j_m1(b: f64, ta: f64, tb: f64) -> f64 {
    if b == 0.0 {
        return (tb / ta).ln();
    }
    let ea = if ta > 0.0 { e1(b / ta) } else { 0.0 };
    e1(b / tb) - ea
}

/// `∫ e^{-B/τ} dτ` over `[ta, tb]`.
fn j_0(b: f64, ta: f64, tb: f64) -> f64 {
    let f = |t: f64| {
        if t <= 0.0 {
            0.0
        } else if b == 0.0 {
            t
        } else {
            t * (-b / t).exp() - b * e1(b / t)
        }
    };
    f(tb) - f(ta)
}

/// `∫ τ^{-2} e^{-B/τ} dτ` over `[ta, tb]` (B > 0).
fn j_m2(b: f64, ta: f64, tb: f64) -> f64 {
    let ea = if ta > 0.0 { (-b / ta).exp() } else { 0.0 };
    ((-b / tb).exp() - ea) / b
}

/// Integrals of `p(τ,x,u)p(τ,y,u)` against the two linear interpolation
/// weights over `τ ∈ [ta, tb]`: returns `(w_near, w_far)` where `w_far`
/// weights the state at `τ = tb` (earlier catalyst time) and `w_near` the
/// state at `τ = ta`. `r2` is `|x-u|² + |y-u|²`.
fn kernel_pair_weights(r2: f64, ta: f64, tb: f64, kappa: f64, d: usize) -> Result<(f64, f64)> {
    let b = r2 / (4.0 * kappa);
    let width = tb - ta;
    if width <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let (i0, i1) = match d {
        1 => {
            let c = 1.0 / (4.0 * PI * kappa);
            let i1 = c * j_0(b, ta, tb);
            if b == 0.0 && ta == 0.0 {
                (f64::INFINITY, i1)
            } else {
                (c * j_m1(b, ta, tb), i1)
            }
        }
        2 => {
            let c = 1.0 / (4.0 * PI * kappa).powi(2);
            if b == 0.0 {
                if ta == 0.0 {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    (c * (1.0 / ta - 1.0 / tb), c * (tb / ta).ln())
                }
            } else {
                (c * j_m2(b, ta, tb), c * j_m1(b, ta, tb))
            }
        }
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    // State at τ = tb has weight (τ - ta)/width, state at τ = ta has (tb - τ)/width.
    let far = if ta == 0.0 { i1 / width } else { (i1 - ta * i0) / width };
    let near = (tb * i0 - i1) / width;
    Ok((near, far))
}

/// Quenched covariance `Γ(x, y) = ∫_0^t ∫ p(t-s,x,u) p(t-s,y,u) Z_s(du) ds`
/// at the given points (`d` coordinates each).
pub fn quenched_covariance(path: &CatalystPath, points: &[f64], t: f64, kappa: f64) -> Result<QuenchedCovariance> {
    let d = path.dimension();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if points.len() % d != 0 {
        return domain("point coordinates must come in groups of d");
    }
    if !(t > 0.0) || t > path.horizon() + 1e-12 {
        return domain(format!("covariance time {t} outside (0, {}]", path.horizon()));
    }
    if !(kappa > 0.0) {
        return domain("kappa must be positive");
    }
    let np = points.len() / d;
    let pt = |i: usize| &points[i * d..(i + 1) * d];
    let mut m = vec![0.0; np * np];
    let last = path.locate(t);
    for k in 0..=last.min(path.times.len() - 1) {
        if k + 1 >= path.times.len() {
            break;
        }
        let (s0, s1) = (path.times[k], path.times[k + 1].min(t));
        if s1 <= s0 {
            continue;
        }
        // Linear interpolation weight of the state at s1 when the step is truncated at t.
        let full = path.times[k + 1] - s0;
        let frac = (s1 - s0) / full;
        let (ta, tb) = (t - s1, t - s0);
        for (state, is_left) in [(&path.states[k], true), (&path.states[k + 1], false)] {
            if state.count() == 0 || state.mass_per_particle == 0.0 {
                continue;
            }
            for u in state.points() {
                for i in 0..np {
                    for j in i..np {
                        let r2: f64 = pt(i).iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                            + pt(j).iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                        let (near, far) = kernel_pair_weights(r2, ta, tb, kappa, d)?;
                        // Inside a truncated step the mixture weights at s0 and s1
                        // are (1 - θ) and θ·frac of the full-step interpolation.
                        let w = if is_left {
                            if frac < 1.0 { far + near * (1.0 - frac) } else { far }
                        } else {
                            near * frac
                        };
                        if !w.is_finite() {
                            return Err(Error::DivergentVariance(format!(
                                "catalyst atom sits on evaluation point {i} at s = {t}; the time integral of (t-s)^(-d/2) diverges"
                            )));
                        }
                        m[i * np + j] += state.mass_per_particle * w;
                    }
                }
            }
        }
    }
    for i in 0..np {
        for j in 0..i {
            m[i * np + j] = m[j * np + i];
        }
    }
    Ok(QuenchedCovariance { dim: np, points: points.to_vec(), matrix: m, t, kappa, path_seed: path.seed })
}

/// `Var(⟨φ, X_t⟩ | Z) = ∫_0^t ⟨G_φ(t-s, ·)², Z_s⟩ ds` by the trapezoid rule
/// on the path grid, with `g(τ, z) = G_φ(τ, z)` supplied by the caller.
pub fn quenched_pairing_variance(path: &CatalystPath, g: &dyn Fn(f64, &[f64]) -> f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || t > path.horizon() + 1e-12 {
        return domain("pairing time outside the path horizon");
    }
    let val = |k: usize, s: f64| {
        let st = &path.states[k];
        st.mass_per_particle * st.points().map(|u| g(t - s, u).powi(2)).sum::<f64>()
    };
    let mut acc = 0.0;
    for k in 0..path.times.len() - 1 {
        let (s0, s1) = (path.times[k], path.times[k + 1]);
        if s0 >= t {
            break;
        }
        let s1c = s1.min(t);
        let theta = (s1c - s0) / (s1 - s0);
        let left = val(k, s0);
        // Interpolated measure at the (possibly truncated) right end.
        let right = if theta < 1.0 { (1.0 - theta) * val(k, s1c) + theta * val(k + 1, s1c) } else { val(k + 1, s1c) };
        acc += 0.5 * (s1c - s0) * (left + right);
    }
    Ok(acc)
}

/// Lower-triangular factor `L` with `L Lᵀ = A + εI`, escalating the jitter
/// `ε` up to `1e-10 · trace`. Zero pivots within the budget are accepted
/// (semidefinite input). Returns the factor and the jitter used.
pub fn cholesky_psd(a: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    if n == 0 || trace == 0.0 {
        if a.iter().any(|&v| v != 0.0) {
            return Err(Error::Conditioning { needed: f64::INFINITY, budget: 0.0 });
        }
        return Ok((vec![0.0; n * n], 0.0));
    }
    let budget = 1e-10 * trace.abs();
    let mut jitter = 0.0;
    loop {
        match try_cholesky(a, n, jitter, budget) {
            Some(l) => return Ok((l, jitter)),
            None => {
                jitter = if jitter == 0.0 { 1e-16 * trace } else { jitter * 10.0 };
                if jitter > budget {
                    return Err(Error::Conditioning { needed: jitter, budget });
                }
            }
        }
    }
}

fn try_cholesky(a: &[f64], n: usize, jitter: f64, budget: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let tiny = budget.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut dj = a[j * n + j] + jitter;
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k];
        }
        if dj < -tiny {
            return None;
        }
        if dj <= tiny * 1e-6 {
            // Semidefinite direction: the rest of the column must vanish too.
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if s.abs() > tiny.sqrt() * 1e-3 {
                    return None;
                }
            }
            continue;
        }
        let ljj = dj.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

/// `out = L z` for a row-major lower-triangular `L`.
fn lower_mul(l: &[f64], n: usize, z: &[f64], out: &mut [f64]) {
    for i in 0..n {
        out[i] = l[i * n..i * n + i + 1].iter().zip(z).map(|(a, b)| a * b).sum();
    }
}

/// Centred Gaussian draws with covariance `cov`, one vector per replica.
pub fn sample_quenched_field(cov: &QuenchedCovariance, replicas: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = cov.dim;
    let (l, _) = cholesky_psd(&cov.matrix, n)?;
    Ok(exec::map_replicas(replicas, |r| {
        let mut rng = rng::stream(seed, "quenched-field", r as u64);
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = vec![0.0; n];
        lower_mul(&l, n, &z, &mut x);
        x
    }))
}

/// `(∫_a^b e^{-Λ(T-s)} ds, ∫_a^b e^{-Λ(T-s)} (s-a) ds)`, stable for small `Λ(b-a)`.
fn exp_moments(lam: f64, a: f64, b: f64, big_t: f64) -> (f64, f64) {
    let w = b - a;
    let scale = (-lam * (big_t - b)).exp();
    let x = lam * w;
    if x < 1e-3 {
        // Series in x = Λw.
        let m0 = w * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        let m1 = w * w * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0);
        (scale * m0, scale * m1)
    } else {
        let one_minus = -(-x).exp_m1();
        let m0 = one_minus / lam;
        // ∫_0^w e^{-Λ(w-y)} y dy = w/Λ - (1 - e^{-Λw})/Λ².
        let m1 = w / lam - one_minus / (lam * lam);
        (scale * m0, scale * m1)
    }
}

/// `⟨φ_j φ_k, μ⟩` over particles inside `[0, 1]^d`, row-major `K × K`.
fn pairing_matrix(state: &ParticleMeasure, eig: &EigenSystem) -> Vec<f64> {
    let k = eig.len();
    let mut p = vec![0.0; k * k];
    let mut vals = vec![0.0; k];
    for u in state.points() {
        if u.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            continue;
        }
        for (j, v) in vals.iter_mut().enumerate() {
            *v = eig.phi(j, u);
        }
        for a in 0..k {
            let va = vals[a] * state.mass_per_particle;
            if va == 0.0 {
                continue;
            }
            for b in a..k {
                p[a * k + b] += va * vals[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            p[a * k + b] = p[b * k + a];
        }
    }
    p
}

/// Covariance of the eigen-coefficient increment over `[t, t+h]`:
/// `C_jk = ∫_t^{t+h} e^{-(λ_j+λ_k)(t+h-s)} ⟨φ_j φ_k, Z_s⟩ ds`.
pub fn eigen_step_covariance(path: &CatalystPath, eig: &EigenSystem, t: f64, h: f64) -> Result<Vec<f64>> {
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; path.states.len()];
    eigen_step_covariance_cached(path, eig, t, h, &mut cache)
}

fn eigen_step_covariance_cached(
    path: &CatalystPath,
    eig: &EigenSystem,
    t: f64,
    h: f64,
    cache: &mut [Option<Vec<f64>>],
) -> Result<Vec<f64>> {
    if path.dimension() != eig.d {
        return domain("catalyst and eigensystem dimensions differ");
    }
    if !(h > 0.0) || t < 0.0 || t + h > path.horizon() * (1.0 + 1e-12) + 1e-15 {
        return domain("increment interval outside the path horizon");
    }
    let kk = eig.len();
    let mut c = vec![0.0; kk * kk];
    let big_t = t + h;
    let first = path.locate(t);
    for k in first..path.times.len() - 1 {
        let (s0, s1) = (path.times[k], path.times[k + 1]);
        let a = s0.max(t);
        let b = s1.min(big_t);
        if b <= a {
            if s0 >= big_t {
                break;
            }
            continue;
        }
        for idx in [k, k + 1] {
            if cache[idx].is_none() {
                cache[idx] = Some(pairing_matrix(&path.states[idx], eig));
            }
        }
        let pl = cache[k].as_ref().unwrap();
        let pr = cache[k + 1].as_ref().unwrap();
        let width = s1 - s0;
        let theta_a = (a - s0) / width;
        for i in 0..kk {
            for j in i..kk {
                let lam = eig.lambdas[i] + eig.lambdas[j];
                let (m0, m1) = exp_moments(lam, a, b, big_t);
                // θ(s) = θ_a + (s - a)/width
                let right = theta_a * m0 + m1 / width;
                let left = m0 - right;
                c[i * kk + j] += left * pl[i * kk + j] + right * pr[i * kk + j];
            }
        }
    }
    for i in 0..kk {
        for j in 0..i {
            c[i * kk + j] = c[j * kk + i];
        }
    }
    Ok(c)
}

/// Eigen-coefficients `A_k(t_i)` of one field realisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenField {
    pub times: Vec<f64>,
    /// `coeffs[i][k] = A_k(times[i])`.
    pub coeffs: Vec<Vec<f64>>,
    pub eig: EigenSystem,
    /// `sup_s ⟨1, Z_s⟩` over the catalyst path, used in tail bounds.
    pub mass_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevNorm {
    pub value: f64,
    /// Bound on the expected squared contribution of discarded modes.
    pub tail_bound: f64,
}

impl EigenField {
    pub fn zero(times: Vec<f64>, eig: EigenSystem) -> Self {
        let coeffs = vec![vec![0.0; eig.len()]; times.len()];
        Self { times, coeffs, eig, mass_bound: 0.0 }
    }

    /// `X(t_i, x) = Σ_k A_k(t_i) φ_k(x)`.
    pub fn reconstruct(&self, i: usize, x: &[f64]) -> f64 {
        self.coeffs[i].iter().enumerate().map(|(k, a)| a * self.eig.phi(k, x)).sum()
    }

    /// `‖X(t_i)‖_{-n}`.
    pub fn sobolev_norm(&self, i: usize, n: f64) -> Result<SobolevNorm> {
        sobolev_norm_of(&self.coeffs[i], &self.eig, n, self.times[i], self.mass_bound)
    }

    /// `‖X(t_j) - X(t_i)‖_{-n}`.
    pub fn increment_norm(&self, i: usize, j: usize, n: f64) -> f64 {
        let diff: Vec<f64> = self.coeffs[j].iter().zip(&self.coeffs[i]).map(|(a, b)| a - b).collect();
        weighted_norm(&diff, &self.eig, n)
    }
}

fn weighted_norm(c: &[f64], eig: &EigenSystem, n: f64) -> f64 {
    c.iter().zip(&eig.lambdas).map(|(a, l)| a * a * (1.0 + l).powf(-n)).sum::<f64>().sqrt()
}

/// `‖f‖_{-n} = (Σ_k c_k² (1+λ_k)^{-n})^{1/2}` with a tail bound
/// `16 T m 2^d Σ_{k>K} (1+λ_k)^{-n}` (`m` a bound on the catalyst mass).
pub fn sobolev_norm_of(c: &[f64], eig: &EigenSystem, n: f64, t: f64, mass_bound: f64) -> Result<SobolevNorm> {
    if !(n > eig.d as f64 / 2.0) {
        return domain(format!(
            "Sobolev order n = {n} must exceed d/2 = {}: Σ(1+λ_k)^(-n) diverges otherwise",
            eig.d as f64 / 2.0
        ));
    }
    let tail = 16.0 * t * mass_bound * 2f64.powi(eig.d as i32) * eig.tail_bound(n);
    Ok(SobolevNorm { value: weighted_norm(c, eig, n), tail_bound: tail })
}

/// Per-step decay factors and Cholesky factors of the increment covariance
/// on `times`; shared by every replica of the same catalyst path.
#[derive(Debug, Clone)]
pub struct EigenStepper {
    pub times: Vec<f64>,
    decay: Vec<Vec<f64>>,
    factors: Vec<Vec<f64>>,
    eig: EigenSystem,
    mass_bound: f64,
}

impl EigenStepper {
    pub fn new(path: &CatalystPath, eig: &EigenSystem, times: &[f64]) -> Result<Self> {
        if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("sampling times must be non-negative and strictly increasing");
        }
        let kk = eig.len();
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; path.states.len()];
        let mut decay = Vec::new();
        let mut factors = Vec::new();
        // A_k(0) = 0, so an initial gap [0, times[0]] is one more step.
        let mut grid = Vec::with_capacity(times.len() + 1);
        if times[0] > 0.0 {
            grid.push(0.0);
        }
        grid.extend_from_slice(times);
        for w in grid.windows(2) {
            let h = w[1] - w[0];
            let c = eigen_step_covariance_cached(path, eig, w[0], h, &mut cache)?;
            let (l, _) = cholesky_psd(&c, kk)?;
            decay.push(eig.lambdas.iter().map(|l| (-l * h).exp()).collect());
            factors.push(l);
        }
        let mass_bound = path.total_masses().into_iter().fold(0.0, f64::max);
        Ok(Self { times: times.to_vec(), decay, factors, eig: eig.clone(), mass_bound })
    }

    pub fn sample(&self, rng: &mut StreamRng) -> EigenField {
        let kk = self.eig.len();
        let mut a = vec![0.0; kk];
        let mut z = vec![0.0; kk];
        let mut inc = vec![0.0; kk];
        let mut coeffs = Vec::with_capacity(self.times.len());
        let skip = self.decay.len() + 1 - self.times.len();
        for (step, (dec, l)) in self.decay.iter().zip(&self.factors).enumerate() {
            if step == 0 && skip == 0 {
                coeffs.push(a.clone());
            }
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            lower_mul(l, kk, &z, &mut inc);
            for ((ak, d), i) in a.iter_mut().zip(dec).zip(&inc) {
                *ak = *ak * d + i;
            }
            coeffs.push(a.clone());
        }
        if self.decay.is_empty() {
            coeffs.push(a);
        }
        EigenField { times: self.times.clone(), coeffs, eig: self.eig.clone(), mass_bound: self.mass_bound }
    }
}

/// Exact-in-distribution recursive sampling of the eigen-coefficients on
/// `times`, one field per replica.
pub fn sample_eigen_paths(
    path: &CatalystPath,
    eig: &EigenSystem,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<EigenField>> {
    let stepper = EigenStepper::new(path, eig, times)?;
    Ok(exec::map_replicas(replicas, |r| stepper.sample(&mut rng::stream(seed, "eigen-field", r as u64))))
}

pub fn sample_eigen_path(path: &CatalystPath, eig: &EigenSystem, times: &[f64], seed: u64) -> Result<EigenField> {
    Ok(sample_eigen_paths(path, eig, times, 1, seed)?.remove(0))
}

/// Outcome of a Hölder exponent fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub slope: f64,
    pub ci95: Interval,
    pub fit: LineFit,
    pub lags: Vec<f64>,
    pub mean_norms: Vec<f64>,
}

/// Least-squares slope of `log E‖X(t+h) - X(t)‖` against `log h` with a
/// percentile bootstrap interval (1000 resamples within each lag level).
pub fn holder_estimate(lags: &[f64], increments: &[Vec<f64>], seed: u64) -> Result<HolderEstimate> {
    if lags.len() != increments.len() {
        return domain("one sample set per lag is required");
    }
    if lags.len() < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: lags.len() });
    }
    if let Some(s) = increments.iter().find(|s| s.len() < 100) {
        return Err(Error::InsufficientSamples { needed: 100, got: s.len() });
    }
    if lags.iter().any(|&h| !(h > 0.0)) {
        return domain("lags must be positive");
    }
    let means: Vec<f64> = increments.iter().map(|s| stats::mean(s)).collect();
    if means.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Degenerate("increment norms vanish at some lag; exponent undefined".into()));
    }
    let fit = stats::loglog_fit(lags, &means);
    let mut rng = rng::stream(seed, "holder-bootstrap", 0);
    let mut slopes: Vec<f64> = (0..1000)
        .map(|_| {
            let m: Vec<f64> = increments
                .iter()
                .map(|s| (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).sum::<f64>() / s.len() as f64)
                .collect();
            stats::loglog_fit(lags, &m).slope
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let ci95 = Interval { lo: stats::quantile_sorted(&slopes, 0.025), hi: stats::quantile_sorted(&slopes, 0.975) };
    Ok(HolderEstimate { slope: fit.slope, ci95, fit, lags: lags.to_vec(), mean_norms: means })
}

/// Samples `‖X_t‖²_{L²(ℝ)}` given a one-dimensional catalyst path.
///
/// The field is built on a periodic grid: over each time sub-interval the
/// catalyst noise is deposited by cloud-in-cell (with the interpolation
/// kernel divided out in Fourier space) and propagated with the heat
/// multiplier at an effective lag that reproduces `∫ ‖p(τ)‖² dτ` exactly.
/// Sub-intervals are refined until `τ_b/τ_a <= ratio`; lags below
/// `4.5 h²/κ`, which the grid cannot resolve, contribute their expected
/// value deterministically.
#[derive(Debug)]
pub struct L2FieldSampler {
    grid: PeriodicGrid,
    prop: HeatPropagator,
    kappa: f64,
    deconv: Vec<f64>,
    pub tau_min: f64,
    pub ratio: f64,
}

impl L2FieldSampler {
    pub fn new(grid: PeriodicGrid, kappa: f64) -> Result<Self> {
        if grid.d != 1 {
            return Err(Error::UnsupportedDimension(grid.d));
        }
        let prop = HeatPropagator::new(&grid, &HeatKernelParams::new(kappa, 1, 2.0)?)?;
        let deconv = grid
            .wave_numbers()
            .iter()
            .map(|&k| {
                let x = 0.5 * k * grid.h;
                let s = if x == 0.0 { 1.0 } else { x.sin() / x };
                1.0 / (s * s)
            })
            .collect();
        let tau_min = 4.5 * grid.h * grid.h / kappa;
        Ok(Self { grid, prop, kappa, deconv, tau_min, ratio: 1.25 })
    }

    fn deposit(&self, state: &ParticleMeasure, weight: f64, rng: &mut StreamRng, rho: &mut [f64]) {
        if weight <= 0.0 || state.count() == 0 {
            return;
        }
        let amp = (state.mass_per_particle * weight).sqrt() / self.grid.h;
        let n = self.grid.n as i64;
        for u in state.points() {
            let z: f64 = rng.sample(StandardNormal);
            let pos = (u[0] - self.grid.lo) / self.grid.h;
            let i0 = pos.floor();
            let f = pos - i0;
            let i = (i0 as i64).rem_euclid(n) as usize;
            let j = (i + 1) % self.grid.n;
            rho[i] += amp * z * (1.0 - f);
            rho[j] += amp * z * f;
        }
    }

    /// Expected `‖X_t‖²` contributed by lags `τ ∈ [ta, tb]` when the masses at
    /// the two ends are `m_near` (τ = ta) and `m_far` (τ = tb).
    fn expected_piece(&self, ta: f64, tb: f64, m_near: f64, m_far: f64, lo: f64, hi: f64) -> f64 {
        // ‖p(τ)‖² = (8πκτ)^{-1/2}; mass is linear in τ between ta and tb.
        let c = 1.0 / (8.0 * PI * self.kappa).sqrt();
        let w = tb - ta;
        let i_half = 2.0 * (hi.sqrt() - lo.sqrt());
        let i_three = (2.0 / 3.0) * (hi.powf(1.5) - lo.powf(1.5));
        let far = (i_three - ta * i_half) / w;
        let near = (tb * i_half - i_three) / w;
        c * (m_far * far + m_near * near)
    }

    pub fn sample_norm_sq(&self, path: &CatalystPath, t: f64, rng: &mut StreamRng) -> Result<f64> {
        if path.dimension() != 1 {
            return Err(Error::UnsupportedDimension(path.dimension()));
        }
        if !(t > 0.0) || t > path.horizon() + 1e-12 {
            return domain("sampling time outside the path horizon");
        }
        let n = self.grid.n;
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let mut rho = vec![0.0; n];
        let mut correction = 0.0;
        for k in 0..path.times.len() - 1 {
            let (s0, s1) = (path.times[k], path.times[k + 1]);
            if s0 >= t {
                break;
            }
            let (ta, tb) = (t - s1.min(t), t - s0);
            let width = s1 - s0;
            let (left, right) = (&path.states[k], &path.states[k + 1]);
            if left.count() == 0 && right.count() == 0 {
                continue;
            }
            // Work in τ; the state at s0 sits at τ = t - s0, the one at s1 at τ = t - s1.
            let tau_s1 = t - s1;
            let lo = ta.max(self.tau_min).min(tb);
            if lo > ta {
                let (m_far, m_near) = (left.total_mass(), right.total_mass());
                correction += self.expected_piece(tau_s1, tb, m_near, m_far, ta, lo);
            }
            let mut cuts = vec![tb];
            let mut cur = tb;
            while cur > lo * self.ratio {
                cur /= self.ratio;
                cuts.push(cur);
            }
            if *cuts.last().unwrap() > lo {
                cuts.push(lo);
            }
            for c in cuts.windows(2) {
                let (hi, lo_c) = (c[0], c[1]);
                if hi <= lo_c {
                    continue;
                }
                // Weights of the two states: θ = (t - τ - s0)/width is the weight of `right`.
                let w_right = ((tb - lo_c) + (tb - hi)) * 0.5 / width * (hi - lo_c);
                let w_left = (hi - lo_c) - w_right;
                let tau_eff = (0.5 * (hi.sqrt() + lo_c.sqrt())).powi(2);
                rho.fill(0.0);
                self.deposit(left, w_left, rng, &mut rho);
                self.deposit(right, w_right, rng, &mut rho);
                let spec = self.prop.forward(&rho);
                for ((a, s), (sym, dc)) in acc.iter_mut().zip(&spec).zip(self.prop.symbol().iter().zip(&self.deconv)) {
                    *a += s * ((-tau_eff * sym).exp() * dc);
                }
            }
        }
        let parseval = self.grid.h / n as f64 * acc.iter().map(|c| c.norm_sqr()).sum::<f64>();
        Ok(parseval + correction)
    }
}

/// True when the path is a single unit atom that never moves.
pub fn is_frozen_atom(path: &CatalystPath) -> bool {
    path.kind == CatalystKind::Frozen && path.states[0].count() == 1
}
