//! Heat kernels, periodic-grid semigroups, the test-function transform
//! `G_φ` and Dirichlet eigensystems on the unit cube.
//!
//! One diffusion coefficient `kappa` fixes the generator `κΔ`. Callers that
//! want the generator `½Δ` pass `kappa = 0.5`; the branching catalyst uses
//! `kappa = 1`.

use crate::error::{domain, Error, Result};
use crate::quad::{integrate, QuadOptions};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelParams {
    pub kappa: f64,
    pub d: usize,
    /// Stable index `a` in `(0, 2]`; `a = 2` is the Gaussian case.
    pub stable_index: f64,
}

impl HeatKernelParams {
    pub fn new(kappa: f64, d: usize, stable_index: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return domain(format!("kappa must be positive, got {kappa}"));
        }
        if d == 0 {
            return domain("dimension must be at least 1");
        }
        if !(stable_index > 0.0 && stable_index <= 2.0) {
            return domain(format!("stable index must lie in (0, 2], got {stable_index}"));
        }
        Ok(Self { kappa, d, stable_index })
    }

    pub fn gaussian(kappa: f64, d: usize) -> Self {
        Self::new(kappa, d, 2.0).expect("invalid Gaussian kernel parameters")
    }

    pub fn is_gaussian(&self) -> bool {
        self.stable_index == 2.0
    }
}

/// `(4πκt)^{-d/2} exp(-r²/(4κt))` for squared distance `r2`; no validation.
#[inline]
pub fn gauss(t: f64, r2: f64, kappa: f64, d: usize) -> f64 {
    let v = 4.0 * kappa * t;
    (PI * v).powf(-0.5 * d as f64) * (-r2 / v).exp()
}

/// Gaussian transition density `p(t, x, y)` of the generator `κΔ`.
pub fn heat_kernel(t: f64, x: &[f64], y: &[f64], params: &HeatKernelParams) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    if x.len() != params.d || y.len() != params.d {
        return domain("point dimension does not match kernel dimension");
    }
    if !params.is_gaussian() {
        return Err(Error::UnsupportedRegime(
            "pointwise kernels exist only for the Gaussian case".into(),
        ));
    }
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(gauss(t, r2, params.kappa, params.d))
}

/// Uniform periodic grid on `[lo, lo + n h)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub d: usize,
    pub n: usize,
    pub lo: f64,
    pub h: f64,
}

impl PeriodicGrid {
    pub fn new(d: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        if n < 2 || !(hi > lo) {
            return domain("grid needs n >= 2 and hi > lo");
        }
        Ok(Self { d, n, lo, h: (hi - lo) / n as f64 })
    }

    /// Grid symmetric around 0 covering `[-half_width, half_width]` plus the
    /// padding `6 sqrt(kappa t_max)` that keeps wrap-around negligible.
    pub fn padded(d: usize, half_width: f64, kappa: f64, t_max: f64, n: usize) -> Result<Self> {
        let pad = 6.0 * (kappa * t_max.max(0.0)).sqrt();
        let l = half_width + pad;
        Self::new(d, -l, l, n)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn period(&self) -> f64 {
        self.h * self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }

    /// Coordinates of flat index `idx` (row-major for `d = 2`).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.d {
            1 => [self.coord(idx), 0.0],
            _ => [self.coord(idx / self.n), self.coord(idx % self.n)],
        }
    }

    /// Cell volume `h^d`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i)[..self.d])).collect()
    }

    /// Angular wave numbers in FFT order along one axis.
    pub fn wave_numbers(&self) -> Vec<f64> {
        let l = self.period();
        (0..self.n)
            .map(|k| {
                let m = if k <= self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
                2.0 * PI * m / l
            })
            .collect()
    }

    /// Linear interpolation of a 1-D grid function, periodic wrap.
    pub fn interpolate(&self, field: &[f64], x: f64) -> f64 {
        let u = (x - self.lo) / self.h;
        let i0 = u.floor();
        let f = u - i0;
        let n = self.n as i64;
        let i = (i0 as i64).rem_euclid(n) as usize;
        let j = (i + 1) % self.n;
        field[i] * (1.0 - f) + field[j] * f
    }

    /// Linear (d = 1) or bilinear (d = 2) periodic interpolation.
    pub fn interpolate_point(&self, field: &[f64], x: &[f64]) -> f64 {
        if self.d == 1 {
            return self.interpolate(field, x[0]);
        }
        let n = self.n as i64;
        let split = |v: f64| {
            let u = (v - self.lo) / self.h;
            let i0 = u.floor();
            let i = (i0 as i64).rem_euclid(n) as usize;
            (i, (i + 1) % self.n, u - i0)
        };
        let (i0, i1, fx) = split(x[0]);
        let (j0, j1, fy) = split(x[1]);
        let at = |i: usize, j: usize| field[i * self.n + j];
        (1.0 - fx) * ((1.0 - fy) * at(i0, j0) + fy * at(i0, j1)) + fx * ((1.0 - fy) * at(i1, j0) + fy * at(i1, j1))
    }
}

/// FFT-based action of `exp(t κ Δ_a)` on a periodic grid. Plans are built
/// once and reused; the struct is immutable and shareable across threads.
pub struct HeatPropagator {
    grid: PeriodicGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
}

impl std::fmt::Debug for HeatPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatPropagator").field("grid", &self.grid).finish()
    }
}

impl HeatPropagator {
    pub fn new(grid: &PeriodicGrid, params: &HeatKernelParams) -> Result<Self> {
        if params.d != grid.d {
            return domain("grid and kernel dimensions differ");
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let k = grid.wave_numbers();
        let a = params.stable_index;
        let symbol = match grid.d {
            1 => k.iter().map(|&x| params.kappa * x.abs().powf(a)).collect(),
            _ => {
                let mut s = Vec::with_capacity(grid.len());
                for &kx in &k {
                    for &ky in &k {
                        s.push(params.kappa * (kx * kx + ky * ky).sqrt().powf(a));
                    }
                }
                s
            }
        };
        Ok(Self { grid: grid.clone(), fwd, inv, symbol })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Symbol `κ|ξ|^a` per Fourier mode in FFT order (flat, row-major).
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let n = self.grid.n;
        match self.grid.d {
            1 => plan.process(data),
            _ => {
                for row in data.chunks_mut(n) {
                    plan.process(row);
                }
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = data[i * n + j];
                    }
                    plan.process(&mut col);
                    for i in 0..n {
                        data[i * n + j] = col[i];
                    }
                }
            }
        }
    }

    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        data
    }

    /// Inverse transform including the `1/len` normalisation; returns the
    /// real part.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, false);
        let scale = 1.0 / self.grid.len() as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    /// Applies the semigroup for time `t` in place.
    pub fn apply_in_place(&self, field: &mut [f64], t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return domain(format!("semigroup time must be >= 0, got {t}"));
        }
        if field.len() != self.grid.len() {
            return domain("field length does not match grid");
        }
        if t == 0.0 {
            return Ok(());
        }
        let mut spec = self.forward(field);
        for (c, s) in spec.iter_mut().zip(&self.symbol) {
            *c *= (-t * s).exp();
        }
        field.copy_from_slice(&self.inverse(spec));
        Ok(())
    }

    pub fn apply(&self, field: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = field.to_vec();
        self.apply_in_place(&mut out, t)?;
        Ok(out)
    }
}

/// One-shot `exp(t κ Δ_a) field`; builds a fresh propagator.
pub fn apply_semigroup(
    grid: &PeriodicGrid,
    field: &[f64],
    t: f64,
    params: &HeatKernelParams,
) -> Result<Vec<f64>> {
    HeatPropagator::new(grid, params)?.apply(field, t)
}

/// Where a one-dimensional test function may be non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Line,
    Interval(f64, f64),
}

/// `G_φ(t, s, z) = ∫ p(t - s, x, z) φ(x) dx` for one-dimensional `φ`.
pub fn g_phi(
    phi: &dyn Fn(f64) -> f64,
    support: Support,
    t: f64,
    s: f64,
    z: f64,
    params: &HeatKernelParams,
) -> Result<f64> {
    if !(s < t) {
        return domain(format!("G_phi needs s < t, got s = {s}, t = {t}"));
    }
    g_phi_tau(phi, support, t - s, z, params)
}

/// Two-argument form with elapsed time `tau = t - s`.
pub fn g_phi_tau(
    phi: &dyn Fn(f64) -> f64,
    support: Support,
    tau: f64,
    z: f64,
    params: &HeatKernelParams,
) -> Result<f64> {
    if !(tau > 0.0) {
        return domain("G_phi needs positive elapsed time");
    }
    if params.d != 1 || !params.is_gaussian() {
        return Err(Error::UnsupportedRegime("G_phi is implemented for d = 1, a = 2".into()));
    }
    // The kernel is below e^{-72} of its peak outside this window.
    let w = 12.0 * (2.0 * params.kappa * tau).sqrt();
    let (mut a, mut b) = (z - w, z + w);
    if let Support::Interval(lo, hi) = support {
        a = a.max(lo);
        b = b.min(hi);
    }
    if a >= b {
        return Ok(0.0);
    }
    let kappa = params.kappa;
    let r = integrate(|x| gauss(tau, (x - z) * (x - z), kappa, 1) * phi(x), a, b, QuadOptions::with_tol(1e-11, 1e-9))?;
    Ok(r.value)
}

/// Weighted Gaussian density `weight · N(center, width²)` in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: f64,
    pub width: f64,
    pub weight: f64,
}

impl GaussianBump {
    pub fn value(&self, x: f64) -> f64 {
        let v = self.width * self.width;
        self.weight * (-(x - self.center).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
    }

    /// Closed-form heat convolution: `∫ p(τ, x, z) φ(x) dx`.
    pub fn heat_convolve(&self, tau: f64, z: f64, kappa: f64) -> f64 {
        let v = self.width * self.width + 2.0 * kappa * tau.max(0.0);
        self.weight * (-(z - self.center).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
    }

    pub fn support(&self) -> Support {
        Support::Interval(self.center - 12.0 * self.width, self.center + 12.0 * self.width)
    }
}

/// Dirichlet eigenpairs of `κΔ` on `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub d: usize,
    pub kappa: f64,
    /// Multi-indices (second entry unused for `d = 1`).
    pub modes: Vec<[usize; 2]>,
    pub lambdas: Vec<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `φ_k(x)`, with `k` a zero-based position in the ordering.
    pub fn phi(&self, k: usize, x: &[f64]) -> f64 {
        let m = self.modes[k];
        let s2 = std::f64::consts::SQRT_2;
        match self.d {
            1 => s2 * (m[0] as f64 * PI * x[0]).sin(),
            _ => 2.0 * (m[0] as f64 * PI * x[0]).sin() * (m[1] as f64 * PI * x[1]).sin(),
        }
    }

    /// `Σ_k (1 + λ_k)^{-p}` over retained modes together with an upper bound
    /// on the discarded tail (infinite when the series diverges).
    pub fn sobolev_weight_sum(&self, p: f64) -> (f64, f64) {
        let head: f64 = self.lambdas.iter().map(|l| (1.0 + l).powf(-p)).sum();
        (head, self.tail_bound(p))
    }

    /// Bound on `Σ_{k > K} (1 + λ_k)^{-p}` by integral comparison.
    pub fn tail_bound(&self, p: f64) -> f64 {
        let c = self.kappa * PI * PI;
        match self.d {
            1 => {
                if p <= 0.5 {
                    return f64::INFINITY;
                }
                let k = self.len() as f64;
                c.powf(-p) * k.powf(1.0 - 2.0 * p) / (2.0 * p - 1.0)
            }
            _ => {
                if p <= 1.0 {
                    return f64::INFINITY;
                }
                // Every discarded mode has |m| >= r_K; lattice points with
                // |m| >= r are covered by unit squares beyond r - √2.
                let lmax = *self.lambdas.last().unwrap_or(&0.0);
                let r0 = (lmax / self.kappa).sqrt() / PI - std::f64::consts::SQRT_2;
                if r0 <= 0.0 {
                    return f64::INFINITY;
                }
                (PI / 2.0) * c.powf(-p) * r0.powf(2.0 - 2.0 * p) / (2.0 * p - 2.0)
            }
        }
    }
}

/// First `k_modes` Dirichlet eigenpairs on `[0, 1]^d`, `d ∈ {1, 2}`, sorted
/// by eigenvalue with ties broken lexicographically.
pub fn dirichlet_eigensystem(d: usize, kappa: f64, k_modes: usize) -> Result<EigenSystem> {
    if !(kappa > 0.0) {
        return domain("kappa must be positive");
    }
    if k_modes == 0 {
        return domain("need at least one mode");
    }
    let c = kappa * PI * PI;
    let modes: Vec<[usize; 2]> = match d {
        1 => (1..=k_modes).map(|k| [k, 0]).collect(),
        2 => {
            // All modes with j² + k² up to the K-th smallest lie in this box.
            let side = ((1.5 * ((k_modes as f64).sqrt() + 1.0)).ceil() as usize) + 1;
            let mut all: Vec<[usize; 2]> =
                (1..=side).flat_map(|j| (1..=side).map(move |k| [j, k])).collect();
            all.sort_by_key(|m| (m[0] * m[0] + m[1] * m[1], m[0], m[1]));
            all.truncate(k_modes);
            all
        }
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    let lambdas = modes
        .iter()
        .map(|m| c * (m[0] * m[0] + m[1] * m[1]) as f64)
        .collect();
    Ok(EigenSystem { d, kappa, modes, lambdas })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_value_at_origin() {
        let p = HeatKernelParams::gaussian(0.5, 1);
        let v = heat_kernel(1.0, &[0.0], &[0.0], &p).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(heat_kernel(0.0, &[0.0], &[0.0], &p).is_err());
    }

    #[test]
    fn one_dim_eigenvalue() {
        let e = dirichlet_eigensystem(1, 0.5, 1).unwrap();
        assert!((e.lambdas[0] - 4.934_802_200_544_679).abs() < 1e-12);
        assert!(dirichlet_eigensystem(3, 1.0, 4).is_err());
    }

    #[test]
    fn two_dim_ordering() {
        let e = dirichlet_eigensystem(2, 1.0, 6).unwrap();
        assert_eq!(e.modes, vec![[1, 1], [1, 2], [2, 1], [2, 2], [1, 3], [3, 1]]);
    }

    #[test]
    fn two_dim_box_is_large_enough() {
        for k in [1, 5, 17, 100, 1024] {
            let e = dirichlet_eigensystem(2, 1.0, k).unwrap();
            let side = e.modes.iter().map(|m| m[0].max(m[1])).max().unwrap();
            let brute: Vec<usize> = {
                let s = side + 3;
                let mut v: Vec<usize> =
                    (1..=s).flat_map(|j| (1..=s).map(move |k| j * j + k * k)).collect();
                v.sort();
                v.truncate(k);
                v
            };
            let got: Vec<usize> = e.modes.iter().map(|m| m[0] * m[0] + m[1] * m[1]).collect();
            assert_eq!(got, brute);
        }
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_linear_between() {
        let g = PeriodicGrid::new(1, -1.0, 1.0, 8).unwrap();
        let f: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(g.interpolate(&f, g.coord(3)), 3.0);
        assert!((g.interpolate(&f, g.coord(3) + 0.5 * g.h) - 3.5).abs() < 1e-12);
    }
}
