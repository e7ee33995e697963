//! The dual evolution equation `u̇ = Δ_a u - u^{1+β} + Φ(s)` on a periodic
//! grid, an independent Picard/Volterra solver for the same mild equation,
//! and the Laplace and characteristic-Laplace functionals built from it.
//!
//! Time in this module is *dual* time: the solve starts from `ψ` at `t0`.
//! A forcing written in catalyst time `s ∈ [0, t]` enters as `Φ(t - r)` at
//! dual time `r`; see [`Forcing::from_catalyst_time`].

use crate::error::{domain, Error, Result};
use crate::kernels::{HeatKernelParams, HeatPropagator, PeriodicGrid};
use crate::superprocess::{ParticleMeasure, SpaceTimeFn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Grid forcing in dual time.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Constant(f64),
    Static(Vec<f64>),
    Dynamic(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for Forcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Constant(c) => write!(f, "Constant({c})"),
            Forcing::Static(_) => write!(f, "Static(..)"),
            Forcing::Dynamic(_) => write!(f, "Dynamic(..)"),
        }
    }
}

impl Forcing {
    /// Writes `Φ(s, ·)` into `out`.
    pub fn fill(&self, s: f64, out: &mut [f64]) {
        match self {
            Forcing::Zero => out.fill(0.0),
            Forcing::Constant(c) => out.fill(*c),
            Forcing::Static(v) => out.copy_from_slice(v),
            Forcing::Dynamic(f) => out.copy_from_slice(&f(s)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// Dual-time forcing `r ↦ Φ(t - r, ·)` sampled on `grid`, from a
    /// catalyst-time forcing `Φ(s, x)` (one-dimensional grids only).
    pub fn from_catalyst_time(grid: &PeriodicGrid, t: f64, phi: Arc<dyn SpaceTimeFn>) -> Self {
        let grid = grid.clone();
        Forcing::Dynamic(Arc::new(move |r: f64| {
            let s = t - r;
            (0..grid.len()).map(|i| phi.eval(s, &grid.point(i)[..grid.d])).collect()
        }))
    }
}

#[derive(Debug, Clone)]
pub struct DualProblem {
    pub grid: PeriodicGrid,
    pub params: HeatKernelParams,
    pub psi: Vec<f64>,
    pub forcing: Forcing,
    pub beta: f64,
    pub t0: f64,
    pub t1: f64,
}

impl DualProblem {
    pub fn new(
        grid: PeriodicGrid,
        params: HeatKernelParams,
        psi: Vec<f64>,
        forcing: Forcing,
        beta: f64,
        t0: f64,
        t1: f64,
    ) -> Result<Self> {
        let p = Self { grid, params, psi, forcing, beta, t0, t1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.psi.len() != self.grid.len() {
            return domain("initial data length does not match grid");
        }
        if self.psi.iter().any(|&v| !(v >= 0.0)) {
            return domain("initial data must be non-negative");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return domain(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if !(self.t0 <= self.t1) {
            return domain("need t0 <= t1");
        }
        if let Forcing::Constant(c) = self.forcing {
            if !(c >= 0.0) {
                return domain("forcing must be non-negative");
            }
        }
        if let Forcing::Static(v) = &self.forcing {
            if v.len() != self.grid.len() || v.iter().any(|&x| !(x >= 0.0)) {
                return domain("static forcing must be non-negative and match the grid");
            }
        }
        Ok(())
    }

    /// Same problem restarted from `psi` on `[t0, t1]`.
    pub fn restarted(&self, psi: Vec<f64>, t0: f64, t1: f64) -> Self {
        Self { psi, t0, t1, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionScheme {
    /// Exact Riccati flow for β = 1, implicit midpoint otherwise.
    #[default]
    Auto,
    /// Implicit midpoint for every β.
    ImplicitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub dt: f64,
    pub scheme: ReactionScheme,
    /// Keep every step (otherwise only the endpoints).
    pub record: bool,
}

impl SolveOptions {
    pub fn new(dt: f64) -> Self {
        Self { dt, scheme: ReactionScheme::Auto, record: false }
    }

    pub fn scheme(mut self, scheme: ReactionScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn recorded(mut self) -> Self {
        self.record = true;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualSolution {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub dt: f64,
    pub scheme: String,
    pub grid: PeriodicGrid,
    pub beta: f64,
    pub params: HeatKernelParams,
    pub warnings: Vec<String>,
    /// Picard iterations used (zero for the splitting solver).
    pub iterations: usize,
}

impl DualSolution {
    pub fn last(&self) -> &[f64] {
        self.u.last().expect("solutions hold at least the initial state")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "grid_index", "x", "u"])?;
        for (t, u) in self.times.iter().zip(&self.u) {
            for (i, v) in u.iter().enumerate() {
                let x = self.grid.point(i);
                let xs = if self.grid.d == 1 { format!("{}", x[0]) } else { format!("{} {}", x[0], x[1]) };
                w.write_record([format!("{t}"), i.to_string(), xs, format!("{v}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "scheme": self.scheme,
            "dt": self.dt,
            "grid": self.grid,
            "beta": self.beta,
            "a": self.params.stable_index,
            "kappa_a": self.params.kappa,
            "iterations": self.iterations,
            "warnings": self.warnings,
        })
    }

    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.metadata())?)?;
        Ok(())
    }
}

#[inline]
fn power(u: f64, beta: f64) -> f64 {
    if beta == 1.0 { u * u.abs() } else { u * u.abs().powf(beta) }
}

/// Exact flow of `u̇ = c - u²` over time `h`, for `u, c >= 0`.
#[inline]
pub fn riccati_step(u: f64, c: f64, h: f64) -> f64 {
    if c <= 0.0 {
        u / (1.0 + u * h)
    } else {
        let r = c.sqrt();
        let th = (r * h).tanh();
        r * (u + r * th) / (r + u * th)
    }
}

/// Implicit midpoint step for `u̇ = c - u|u|^β`, Newton iterated to
/// convergence on the midpoint value.
pub fn implicit_midpoint_step(u0: f64, c: f64, beta: f64, h: f64) -> f64 {
    // g(m) = 2(m - u0)/h - c + m|m|^β is strictly increasing in m.
    let mut m = u0;
    for _ in 0..60 {
        let g = 2.0 * (m - u0) / h - c + power(m, beta);
        let dg = 2.0 / h + (1.0 + beta) * m.abs().powf(beta);
        let step = g / dg;
        m -= step;
        if step.abs() <= 1e-15 * m.abs().max(1e-300) {
            break;
        }
    }
    2.0 * m - u0
}

fn stiffness_warning(p: &DualProblem, dt: f64) -> Option<String> {
    let mut umax = p.psi.iter().cloned().fold(0.0, f64::max);
    let mut buf = vec![0.0; p.grid.len()];
    p.forcing.fill(p.t0, &mut buf);
    let fmax = buf.iter().cloned().fold(0.0, f64::max);
    // The forcing alone can lift u to about its equilibrium level.
    umax = umax.max(fmax.powf(1.0 / (1.0 + p.beta)));
    let s = dt * (1.0 + p.beta) * umax.powf(p.beta);
    (s > 1.0).then(|| format!("dt (1 + beta) max|u|^beta = {s:.3} > 1; reaction step is stiff"))
}

/// Strang splitting: half linear flow, reaction with the forcing frozen at
/// the step midpoint, half linear flow.
pub fn solve_dual(problem: &DualProblem, opts: &SolveOptions) -> Result<DualSolution> {
    problem.validate()?;
    if !(opts.dt > 0.0) {
        return domain("dt must be positive");
    }
    let prop = HeatPropagator::new(&problem.grid, &problem.params)?;
    solve_dual_with(problem, opts, &prop)
}

/// [`solve_dual`] with a caller-supplied propagator (reused across solves).
pub fn solve_dual_with(problem: &DualProblem, opts: &SolveOptions, prop: &HeatPropagator) -> Result<DualSolution> {
    let span = problem.t1 - problem.t0;
    let steps = if span > 0.0 { ((span / opts.dt) - 1e-9).ceil().max(1.0) as usize } else { 0 };
    let h = if steps > 0 { span / steps as f64 } else { 0.0 };
    let exact = opts.scheme == ReactionScheme::Auto && problem.beta == 1.0;
    let scheme = if exact { "strang/riccati" } else { "strang/implicit-midpoint" };
    let mut warnings = Vec::new();
    if !exact {
        warnings.extend(stiffness_warning(problem, h));
    }
    let mut u = problem.psi.clone();
    let mut c = vec![0.0; u.len()];
    let mut times = vec![problem.t0];
    let mut us = vec![u.clone()];
    for k in 0..steps {
        let s = problem.t0 + k as f64 * h;
        prop.apply_in_place(&mut u, 0.5 * h)?;
        problem.forcing.fill(s + 0.5 * h, &mut c);
        for (ui, &ci) in u.iter_mut().zip(&c) {
            // FFT round-off can leave tiny negative values; the reaction
            // is only defined for u >= 0.
            let u0 = ui.max(0.0);
            *ui = if exact { riccati_step(u0, ci, h) } else { implicit_midpoint_step(u0, ci, problem.beta, h) };
        }
        prop.apply_in_place(&mut u, 0.5 * h)?;
        if let Some(&bad) = u.iter().find(|&&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::Instability(format!("u = {bad:e} at s = {}", s + h)));
        }
        // Keep the output a valid initial datum for restarted solves.
        for v in u.iter_mut() {
            *v = v.max(0.0);
        }
        if opts.record || k + 1 == steps {
            times.push(if k + 1 == steps { problem.t1 } else { s + h });
            us.push(u.clone());
        }
    }
    Ok(DualSolution {
        times,
        u: us,
        dt: h,
        scheme: scheme.into(),
        grid: problem.grid.clone(),
        beta: problem.beta,
        params: problem.params,
        warnings,
        iterations: 0,
    })
}

/// Picard iteration on the mild (Volterra) form
/// `u(s) = V_{s-t0} ψ + ∫_{t0}^s V_{s-r}(Φ(r) - u(r)^{1+β}) dr`,
/// trapezoid rule in `r`, semigroup applied in Fourier space.
///
/// Stops when successive iterates differ by less than `1e-13` in sup norm
/// or after `iterations` sweeps. Reports divergence if the distance grows
/// once at least five sweeps have been made.
pub fn picard_volterra_oracle(problem: &DualProblem, dt: f64, iterations: usize) -> Result<DualSolution> {
    problem.validate()?;
    if !(dt > 0.0) || iterations == 0 {
        return domain("need dt > 0 and at least one iteration");
    }
    let prop = HeatPropagator::new(&problem.grid, &problem.params)?;
    let span = problem.t1 - problem.t0;
    let m = if span > 0.0 { ((span / dt) - 1e-9).ceil().max(1.0) as usize } else { 0 };
    let h = if m > 0 { span / m as f64 } else { 0.0 };
    let n = problem.grid.len();
    let times: Vec<f64> = (0..=m).map(|i| problem.t0 + i as f64 * h).collect();
    let decay: Vec<f64> = prop.symbol().iter().map(|s| (-h * s).exp()).collect();

    let psi_hat = prop.forward(&problem.psi);
    let mut free = Vec::with_capacity(m + 1);
    let mut ph = psi_hat.clone();
    for i in 0..=m {
        if i > 0 {
            for (c, e) in ph.iter_mut().zip(&decay) {
                *c *= e;
            }
        }
        free.push(ph.clone());
    }
    let free_real: Vec<Vec<f64>> = free.iter().map(|f| prop.inverse(f.clone())).collect();
    let forcing: Vec<Vec<f64>> = times
        .iter()
        .map(|&s| {
            let mut v = vec![0.0; n];
            problem.forcing.fill(s, &mut v);
            v
        })
        .collect();

    let mut u = free_real.clone();
    let mut last = f64::INFINITY;
    let mut used = 0;
    for it in 1..=iterations {
        used = it;
        let mut next = Vec::with_capacity(m + 1);
        next.push(problem.psi.clone());
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let mut g_prev = {
            let g: Vec<f64> = forcing[0].iter().zip(&u[0]).map(|(f, &v)| f - power(v, problem.beta)).collect();
            prop.forward(&g)
        };
        for i in 1..=m {
            let w = if i == 1 { 0.5 * h } else { h };
            for ((a, g), e) in acc.iter_mut().zip(&g_prev).zip(&decay) {
                *a = (*a + g * w) * e;
            }
            let g: Vec<f64> = forcing[i].iter().zip(&u[i]).map(|(f, &v)| f - power(v, problem.beta)).collect();
            let g_hat = prop.forward(&g);
            let total: Vec<Complex64> = free[i]
                .iter()
                .zip(&acc)
                .zip(&g_hat)
                .map(|((f, a), g)| f + a + g * (0.5 * h))
                .collect();
            next.push(prop.inverse(total));
            g_prev = g_hat;
        }
        let dist = next
            .iter()
            .zip(&u)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        u = next;
        if !dist.is_finite() || (it > 5 && dist > last) {
            return Err(Error::Divergence { iterations: it, last_distance: dist });
        }
        if dist < 1e-13 {
            break;
        }
        last = dist;
    }
    Ok(DualSolution {
        times,
        u,
        dt: h,
        scheme: "picard-volterra/trapezoid".into(),
        grid: problem.grid.clone(),
        beta: problem.beta,
        params: problem.params,
        warnings: Vec::new(),
        iterations: used,
    })
}

/// Initial measure for the Laplace functionals.
#[derive(Debug, Clone)]
pub enum InitialMeasure {
    Particles(ParticleMeasure),
    /// Density sampled on the solver grid.
    Density(Vec<f64>),
    /// Point mass of the given weight.
    Atom { x: Vec<f64>, mass: f64 },
}

/// `⟨u, μ⟩` with grid interpolation for point masses and a Riemann sum for
/// densities.
pub fn pair_with_measure(grid: &PeriodicGrid, u: &[f64], mu: &InitialMeasure) -> Result<f64> {
    Ok(match mu {
        InitialMeasure::Particles(p) => {
            if p.d != grid.d {
                return domain("measure and grid dimensions differ");
            }
            p.mass_per_particle * p.points().map(|x| grid.interpolate_point(u, x)).sum::<f64>()
        }
        InitialMeasure::Density(rho) => {
            if rho.len() != u.len() {
                return domain("density length does not match grid");
            }
            grid.cell() * u.iter().zip(rho).map(|(a, b)| a * b).sum::<f64>()
        }
        InitialMeasure::Atom { x, mass } => {
            if x.len() != grid.d {
                return domain("atom and grid dimensions differ");
            }
            mass * grid.interpolate_point(u, x)
        }
    })
}

impl InitialMeasure {
    /// The same measure with all masses multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            InitialMeasure::Particles(p) => {
                InitialMeasure::Particles(ParticleMeasure { mass_per_particle: p.mass_per_particle * k, ..p.clone() })
            }
            InitialMeasure::Density(r) => InitialMeasure::Density(r.iter().map(|v| v * k).collect()),
            InitialMeasure::Atom { x, mass } => InitialMeasure::Atom { x: x.clone(), mass: mass * k },
        }
    }
}

/// `exp(-⟨u(t1), μ⟩)` for the dual solution of `problem`.
pub fn laplace_functional(mu: &InitialMeasure, problem: &DualProblem, opts: &SolveOptions) -> Result<f64> {
    let sol = solve_dual(problem, opts)?;
    Ok((-pair_with_measure(&problem.grid, sol.last(), mu)?).exp())
}

/// Inputs of the joint characteristic-Laplace functional
/// `E_μ[exp(i⟨φ, X_t⟩ - ⟨λ, Z_t⟩)]` on a one-dimensional grid.
#[derive(Debug, Clone)]
pub struct CharLaplaceQuery {
    pub grid: PeriodicGrid,
    /// Catalyst motion (κ = 1 for the super-Brownian catalyst).
    pub catalyst: HeatKernelParams,
    /// Diffusion coefficient of the field's own semigroup (½ for `½Δ`).
    pub field_kappa: f64,
    /// Test function `φ` sampled on the grid.
    pub phi: Vec<f64>,
    /// Catalyst test function `λ ≥ 0` sampled on the grid.
    pub lambda: Vec<f64>,
    pub t: f64,
    pub beta: f64,
}

impl CharLaplaceQuery {
    /// Dual problem with initial data `λ` and dual-time forcing
    /// `½ G_φ(r, ·)²`, where `G_φ(r) = e^{r κ_f Δ} φ`.
    pub fn dual_problem(&self) -> Result<DualProblem> {
        let field = HeatKernelParams::new(self.field_kappa, self.grid.d, 2.0)?;
        let prop = Arc::new(HeatPropagator::new(&self.grid, &field)?);
        let phi_hat = prop.forward(&self.phi);
        let forcing = if self.phi.iter().all(|&v| v == 0.0) {
            Forcing::Zero
        } else {
            let p = Arc::clone(&prop);
            Forcing::Dynamic(Arc::new(move |r: f64| {
                let spec: Vec<Complex64> =
                    phi_hat.iter().zip(p.symbol()).map(|(c, s)| c * (-r * s).exp()).collect();
                p.inverse(spec).into_iter().map(|g| 0.5 * g * g).collect()
            }))
        };
        DualProblem::new(self.grid.clone(), self.catalyst, self.lambda.clone(), forcing, self.beta, 0.0, self.t)
    }
}

/// `exp(-⟨u(t), μ⟩)`, equal to `E_μ[exp(i⟨φ, X_t⟩ - ⟨λ, Z_t⟩)]` under the
/// centred-Gaussian identity `E e^{iG} = e^{-Var(G)/2}`.
pub fn char_laplace_exponent(mu: &InitialMeasure, query: &CharLaplaceQuery, opts: &SolveOptions) -> Result<f64> {
    let problem = query.dual_problem()?;
    laplace_functional(mu, &problem, opts)
}
