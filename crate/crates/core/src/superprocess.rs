//! Branching-particle approximation of super-Brownian motion, the moving
//! atom catalyst, measure pairings and weighted occupation integrals.
//!
//! Particles carry mass `1/N` and branch critically at rate `2N`, which
//! gives the branching mechanism `u²` (so `Var⟨1, Z_t⟩ = 2t` from unit
//! mass). Spatial motion has generator `κΔ`, i.e. per-coordinate variance
//! `2κ` per unit time.

use crate::error::{domain, Error, Result};
use crate::kernels::HeatKernelParams;
use crate::rng::{self, StreamRng};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Default bound on stored particle slots (summed over recorded states).
pub const DEFAULT_POPULATION_CAP: usize = 10_000_000;

/// Finite collection of equally weighted particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleMeasure {
    pub d: usize,
    /// Flat coordinates, `d` per particle.
    pub positions: Vec<f64>,
    pub mass_per_particle: f64,
    pub time: f64,
}

impl ParticleMeasure {
    pub fn new(d: usize, positions: Vec<f64>, mass_per_particle: f64, time: f64) -> Result<Self> {
        if d == 0 || positions.len() % d != 0 {
            return domain("positions length must be a multiple of d >= 1");
        }
        if !(mass_per_particle >= 0.0) {
            return domain("particle mass must be non-negative");
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return domain("particle coordinates must be finite");
        }
        Ok(Self { d, positions, mass_per_particle, time })
    }

    pub fn empty(d: usize, time: f64) -> Self {
        Self { d, positions: Vec::new(), mass_per_particle: 0.0, time }
    }

    /// `round(mass · n)` particles of mass `1/n` at `x`.
    pub fn point_mass(x: &[f64], mass: f64, n: usize) -> Self {
        let count = (mass * n as f64).round() as usize;
        let positions = x.iter().copied().cycle().take(count * x.len()).collect();
        Self { d: x.len(), positions, mass_per_particle: 1.0 / n as f64, time: 0.0 }
    }

    /// Unit atom used by the moving-atom catalyst.
    pub fn atom(x: &[f64], time: f64) -> Self {
        Self { d: x.len(), positions: x.to_vec(), mass_per_particle: 1.0, time }
    }

    /// Deterministic stand-in for `mass` times the uniform distribution on
    /// `[lo, hi]` (one dimension, midpoint rule).
    pub fn uniform_1d(lo: f64, hi: f64, count: usize, mass: f64) -> Self {
        let w = (hi - lo) / count as f64;
        let positions = (0..count).map(|i| lo + (i as f64 + 0.5) * w).collect();
        Self { d: 1, positions, mass_per_particle: mass / count as f64, time: 0.0 }
    }

    pub fn count(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn total_mass(&self) -> f64 {
        self.count() as f64 * self.mass_per_particle
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.positions.chunks_exact(self.d)
    }
}

/// `⟨μ, φ⟩ = m Σ_i φ(x_i)` for a particle measure with per-particle mass `m`.
pub fn measure_pairing(state: &ParticleMeasure, phi: &dyn Fn(&[f64]) -> f64) -> f64 {
    state.mass_per_particle * state.points().map(phi).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalystKind {
    Sbm,
    Atom,
    Frozen,
}

/// How a particle's branching is sampled within one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchingScheme {
    /// Half move, exact offspring law of rate-`2N` critical binary
    /// branching over the step, independent half moves of the offspring.
    /// Unbiased in total mass for any step size.
    #[default]
    Exact,
    /// Full move, then one Bernoulli(`1 - e^{-2N dt}`) event producing 0 or
    /// 2 offspring. First order; needs `2N dt` small.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmOptions {
    /// Particle scale `N` (mass per particle `1/N`, branching rate `2N`).
    pub n_scale: usize,
    pub horizon: f64,
    pub dt: f64,
    pub scheme: BranchingScheme,
    pub population_cap: usize,
}

impl SbmOptions {
    pub fn new(n_scale: usize, horizon: f64, dt: f64) -> Self {
        Self {
            n_scale,
            horizon,
            dt,
            scheme: BranchingScheme::Exact,
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }

    /// Number of steps and the step actually used (`horizon / steps`).
    pub fn grid(&self) -> (usize, f64) {
        let m = ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (m, self.horizon / m as f64)
    }
}

/// Time-indexed sequence of particle measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalystPath {
    pub times: Vec<f64>,
    pub states: Vec<ParticleMeasure>,
    pub kind: CatalystKind,
    pub seed: Option<u64>,
    pub n_scale: usize,
    pub kappa: f64,
    pub dt: f64,
    pub warnings: Vec<String>,
}

impl CatalystPath {
    /// Path that holds `state` fixed at every time in `times`.
    pub fn frozen(state: &ParticleMeasure, times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        let states = times
            .iter()
            .map(|&t| ParticleMeasure { time: t, ..state.clone() })
            .collect();
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(Self {
            times,
            states,
            kind: CatalystKind::Frozen,
            seed: None,
            n_scale: (1.0 / state.mass_per_particle.max(f64::MIN_POSITIVE)).round() as usize,
            kappa: 0.0,
            dt,
            warnings: Vec::new(),
        })
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("paths are never empty")
    }

    pub fn dimension(&self) -> usize {
        self.states[0].d
    }

    pub fn total_masses(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.total_mass()).collect()
    }

    /// Index `i` with `times[i] <= t < times[i+1]` (last index at the horizon).
    pub fn locate(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// CSV rows `(replica, time_index, time, particle_index, x1..xd)`.
    pub fn write_csv<W: Write>(paths: &[CatalystPath], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = paths.first().map_or(1, |p| p.dimension());
        let mut header = vec!["replica".to_string(), "time_index".into(), "time".into(), "particle_index".into()];
        header.extend((1..=d).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for (r, path) in paths.iter().enumerate() {
            for (ti, st) in path.states.iter().enumerate() {
                for (pi, x) in st.points().enumerate() {
                    let mut rec = vec![r.to_string(), ti.to_string(), format!("{}", st.time), pi.to_string()];
                    rec.extend(x.iter().map(|v| format!("{v}")));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.n_scale,
            "dt": self.dt,
            "seed": self.seed,
            "kind": self.kind,
            "kappa": self.kappa,
            "d": self.dimension(),
            "horizon": self.horizon(),
            "mass_per_particle": self.states[0].mass_per_particle,
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn export(paths: &[CatalystPath], dir: &Path, stem: &str) -> Result<()> {
        let Some(first) = paths.first() else {
            return domain("nothing to export");
        };
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        Self::write_csv(paths, std::io::BufWriter::new(f))?;
        let mut meta = first.sidecar();
        meta["replicas"] = serde_json::json!(paths.len());
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return domain("time grid is empty");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("time grid must be strictly increasing");
    }
    Ok(())
}

fn validate_sbm(opts: &SbmOptions, params: &HeatKernelParams) -> Result<()> {
    if !params.is_gaussian() {
        return Err(Error::UnsupportedRegime(
            "particle catalysts support only Brownian motion (a = 2)".into(),
        ));
    }
    if opts.n_scale == 0 {
        return domain("particle scale N must be at least 1");
    }
    if !(opts.dt > 0.0) || !(opts.horizon >= 0.0) {
        return domain("need dt > 0 and horizon >= 0");
    }
    Ok(())
}

/// Streaming branching-particle simulator; one step at a time, no history.
#[derive(Debug, Clone)]
pub struct SbmStepper {
    state: ParticleMeasure,
    scratch: Vec<f64>,
    rng: StreamRng,
    dt: f64,
    n_scale: usize,
    sd_full: f64,
    scheme: BranchingScheme,
    cap: usize,
    /// `ln(q)` for the geometric part of the exact offspring law.
    ln_q: f64,
    p_extinct: f64,
    p_branch: f64,
}

impl SbmStepper {
    pub fn new(
        initial: &ParticleMeasure,
        opts: &SbmOptions,
        params: &HeatKernelParams,
        rng: StreamRng,
    ) -> Result<Self> {
        validate_sbm(opts, params)?;
        if initial.d != params.d {
            return domain("initial measure and kernel dimensions differ");
        }
        let (_, dt) = opts.grid();
        let a = opts.n_scale as f64 * dt;
        let mut state = initial.clone();
        state.mass_per_particle = 1.0 / opts.n_scale as f64;
        Ok(Self {
            state,
            scratch: Vec::new(),
            rng,
            dt,
            n_scale: opts.n_scale,
            sd_full: (2.0 * params.kappa * dt).sqrt(),
            scheme: opts.scheme,
            cap: opts.population_cap,
            ln_q: (a / (1.0 + a)).ln(),
            p_extinct: a / (1.0 + a),
            p_branch: -(-2.0 * a).exp_m1(),
        })
    }

    pub fn state(&self) -> &ParticleMeasure {
        &self.state
    }

    pub fn into_state(self) -> ParticleMeasure {
        self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_scale(&self) -> usize {
        self.n_scale
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        let d = self.state.d;
        let mut out = std::mem::take(&mut self.scratch);
        out.clear();
        let rng = &mut self.rng;
        match self.scheme {
            BranchingScheme::Exact => {
                let sd = self.sd_full * std::f64::consts::FRAC_1_SQRT_2;
                let mut x = vec![0.0; d];
                for p in self.state.positions.chunks_exact(d) {
                    let u: f64 = rng.random();
                    if u < self.p_extinct {
                        continue;
                    }
                    let v: f64 = 1.0 - rng.random::<f64>();
                    let k = 1 + (v.ln() / self.ln_q).floor() as usize;
                    for (xi, &pi) in x.iter_mut().zip(p) {
                        *xi = pi + sd * rng.sample::<f64, _>(StandardNormal);
                    }
                    for _ in 0..k {
                        for &xi in &x {
                            out.push(xi + sd * rng.sample::<f64, _>(StandardNormal));
                        }
                    }
                    if out.len() / d > self.cap {
                        return Err(Error::PopulationCap { cap: self.cap, time: self.state.time + self.dt });
                    }
                }
            }
            BranchingScheme::Bernoulli => {
                let sd = self.sd_full;
                let mut x = vec![0.0; d];
                for p in self.state.positions.chunks_exact(d) {
                    for (xi, &pi) in x.iter_mut().zip(p) {
                        *xi = pi + sd * rng.sample::<f64, _>(StandardNormal);
                    }
                    let u: f64 = rng.random();
                    let copies = if u < self.p_branch {
                        if rng.random::<bool>() { 2 } else { 0 }
                    } else {
                        1
                    };
                    for _ in 0..copies {
                        out.extend_from_slice(&x);
                    }
                    if out.len() / d > self.cap {
                        return Err(Error::PopulationCap { cap: self.cap, time: self.state.time + self.dt });
                    }
                }
            }
        }
        self.scratch = std::mem::replace(&mut self.state.positions, out);
        self.state.time += self.dt;
        Ok(())
    }
}

fn branching_warnings(opts: &SbmOptions) -> Vec<String> {
    let (_, dt) = opts.grid();
    let rate = 2.0 * opts.n_scale as f64 * dt;
    if opts.scheme == BranchingScheme::Bernoulli && rate > 0.1 {
        vec![format!("2 N dt = {rate:.3} > 0.1: Bernoulli branching per step is degraded")]
    } else {
        Vec::new()
    }
}

/// Simulates super-Brownian motion (β = 1, a = 2) from `initial` and
/// records every step. Particle masses are reset to `1/N`.
pub fn simulate_sbm(
    initial: &ParticleMeasure,
    opts: &SbmOptions,
    params: &HeatKernelParams,
    seed: u64,
) -> Result<CatalystPath> {
    let mut stepper = SbmStepper::new(initial, opts, params, rng::stream(seed, "sbm", 0))?;
    let (m, dt) = opts.grid();
    let mut times = Vec::with_capacity(m + 1);
    let mut states = Vec::with_capacity(m + 1);
    let mut stored = stepper.state().count();
    let mut st0 = stepper.state().clone();
    st0.time = 0.0;
    times.push(0.0);
    states.push(st0);
    for i in 1..=m {
        stepper.step()?;
        let mut st = stepper.state().clone();
        // Use the grid value rather than the accumulated sum.
        st.time = i as f64 * dt;
        stored += st.count();
        if stored > opts.population_cap {
            return Err(Error::PopulationCap { cap: opts.population_cap, time: st.time });
        }
        times.push(st.time);
        states.push(st);
    }
    Ok(CatalystPath {
        times,
        states,
        kind: CatalystKind::Sbm,
        seed: Some(seed),
        n_scale: opts.n_scale,
        kappa: params.kappa,
        dt,
        warnings: branching_warnings(opts),
    })
}

/// Standard Brownian motion (variance `dt` per coordinate per step) carrying
/// a unit atom, started at the origin.
pub fn simulate_atom_catalyst(horizon: f64, dt: f64, d: usize, seed: u64) -> Result<CatalystPath> {
    if !(dt > 0.0) || !(horizon >= 0.0) || d == 0 {
        return domain("need dt > 0, horizon >= 0 and d >= 1");
    }
    let m = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / m as f64;
    let sd = h.sqrt();
    let mut rng = rng::stream(seed, "atom", 0);
    let mut x = vec![0.0; d];
    let mut times = Vec::with_capacity(m + 1);
    let mut states = Vec::with_capacity(m + 1);
    times.push(0.0);
    states.push(ParticleMeasure::atom(&x, 0.0));
    for i in 1..=m {
        for xi in x.iter_mut() {
            *xi += sd * rng.sample::<f64, _>(StandardNormal);
        }
        let t = i as f64 * h;
        times.push(t);
        states.push(ParticleMeasure::atom(&x, t));
    }
    Ok(CatalystPath {
        times,
        states,
        kind: CatalystKind::Atom,
        seed: Some(seed),
        n_scale: 1,
        kappa: 0.5,
        dt: h,
        warnings: Vec::new(),
    })
}

/// Space-time test function `Φ(s, x)`. `eval_left` is the left limit in
/// time, which differs from `eval` only at jump times.
pub trait SpaceTimeFn: Send + Sync {
    fn eval(&self, s: f64, x: &[f64]) -> f64;
    fn eval_left(&self, s: f64, x: &[f64]) -> f64 {
        self.eval(s, x)
    }
}

/// Continuous-in-time forcing given by a closure.
pub struct FnForcing<F>(pub F);

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> SpaceTimeFn for FnForcing<F> {
    fn eval(&self, s: f64, x: &[f64]) -> f64 {
        (self.0)(s, x)
    }
}

/// `Φ(s, x) = levels[j] · profile(x)` for `s ∈ [breaks[j], breaks[j+1])`,
/// right-continuous; the last level extends to `+∞`.
#[derive(Clone)]
pub struct StepInTime {
    pub breaks: Vec<f64>,
    pub levels: Vec<f64>,
    pub profile: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl StepInTime {
    pub fn new(breaks: Vec<f64>, levels: Vec<f64>, profile: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>) -> Result<Self> {
        if breaks.len() != levels.len() || breaks.is_empty() {
            return domain("need one level per break point");
        }
        check_times(&breaks)?;
        Ok(Self { breaks, levels, profile })
    }

    pub fn level_at(&self, s: f64) -> f64 {
        let j = self.breaks.partition_point(|&b| b <= s);
        if j == 0 { 0.0 } else { self.levels[j - 1] }
    }

    pub fn level_left(&self, s: f64) -> f64 {
        let j = self.breaks.partition_point(|&b| b < s);
        if j == 0 { 0.0 } else { self.levels[j - 1] }
    }
}

impl SpaceTimeFn for StepInTime {
    fn eval(&self, s: f64, x: &[f64]) -> f64 {
        self.level_at(s) * (self.profile)(x)
    }
    fn eval_left(&self, s: f64, x: &[f64]) -> f64 {
        self.level_left(s) * (self.profile)(x)
    }
}

/// Trapezoid approximation of `∫_0^T ⟨Φ(s), Z_s⟩ ds` on the path grid. Each
/// step uses the value at its left end and the left limit at its right end,
/// so forcings that jump on grid points are integrated without smearing.
pub fn occupation_integral(path: &CatalystPath, forcing: &dyn SpaceTimeFn) -> f64 {
    let pair = |i: usize, left: bool| {
        let s = path.times[i];
        let st = &path.states[i];
        let f = |x: &[f64]| if left { forcing.eval_left(s, x) } else { forcing.eval(s, x) };
        measure_pairing(st, &f)
    };
    (0..path.times.len().saturating_sub(1))
        .map(|i| 0.5 * (path.times[i + 1] - path.times[i]) * (pair(i, false) + pair(i + 1, true)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_with_constants() {
        let m = ParticleMeasure::point_mass(&[0.0], 1.0, 10);
        assert!((measure_pairing(&m, &|_| 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(measure_pairing(&m, &|_| 0.0), 0.0);
    }

    #[test]
    fn frozen_delta_occupation_equals_horizon() {
        let m = ParticleMeasure::point_mass(&[0.0], 1.0, 1);
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let p = CatalystPath::frozen(&m, times).unwrap();
        let v = occupation_integral(&p, &FnForcing(|_s: f64, _x: &[f64]| 1.0));
        assert!((v - 3.0).abs() < 1e-12);
        assert_eq!(occupation_integral(&p, &FnForcing(|_s: f64, _x: &[f64]| 0.0)), 0.0);
    }

    #[test]
    fn step_forcing_is_integrated_exactly_on_aligned_grid() {
        let m = ParticleMeasure::point_mass(&[0.0], 1.0, 1);
        let times: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
        let p = CatalystPath::frozen(&m, times).unwrap();
        let f = StepInTime::new(vec![0.0, 0.5], vec![1.0, 3.0], Arc::new(|_: &[f64]| 1.0)).unwrap();
        assert!((occupation_integral(&p, &f) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unsupported_regime() {
        let m = ParticleMeasure::point_mass(&[0.0], 1.0, 4);
        let p = HeatKernelParams::new(1.0, 1, 1.5).unwrap();
        let r = simulate_sbm(&m, &SbmOptions::new(4, 1.0, 0.1), &p, 1);
        assert!(matches!(r, Err(Error::UnsupportedRegime(_))));
    }

    #[test]
    fn population_cap_is_enforced() {
        let m = ParticleMeasure::point_mass(&[0.0], 1.0, 1000);
        let mut o = SbmOptions::new(1000, 1.0, 0.01);
        o.population_cap = 5000;
        let r = simulate_sbm(&m, &o, &HeatKernelParams::gaussian(1.0, 1), 3);
        assert!(matches!(r, Err(Error::PopulationCap { .. })));
    }

    #[test]
    fn bernoulli_scheme_warns_on_coarse_steps() {
        let m = ParticleMeasure::point_mass(&[0.0], 1.0, 100);
        let mut o = SbmOptions::new(100, 0.1, 0.01);
        o.scheme = BranchingScheme::Bernoulli;
        let p = simulate_sbm(&m, &o, &HeatKernelParams::gaussian(1.0, 1), 3).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }
}
