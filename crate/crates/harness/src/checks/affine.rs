use super::common::catalyst_kernel;
use super::{Body, Ctx};
use crate::cells;
use crate::config::AffineParams;
use crate::error::HarnessError;
use crate::plot::{Plot, Series};
use crate::report::{Row, Table};
use catalytic_ou::affine_ref::{
    cir_closed_form, cir_psi_phi, cir_transform, dormand_prince, euler_maruyama, ou_psi_phi, ou_transform,
    AffineKind, AffineModel,
};
use catalytic_ou::dual_pde::{laplace_functional, DualProblem, Forcing, InitialMeasure, SolveOptions};
use catalytic_ou::kernels::{GaussianBump, PeriodicGrid};
use catalytic_ou::stats::{self, linear_fit};
use catalytic_ou::superprocess::ParticleMeasure;
use num_complex::Complex64;

/// Largest residual of a least-squares line through `(xs, ys)`.
fn collinearity_residual(xs: &[f64], ys: &[f64]) -> f64 {
    let fit = linear_fit(xs, ys);
    xs.iter().zip(ys).map(|(x, y)| (y - fit.intercept - fit.slope * x).abs()).fold(0.0, f64::max)
}

fn model(kind: AffineKind, p: &AffineParams, x0: f64) -> Result<AffineModel, HarnessError> {
    Ok(AffineModel::new(kind, p.b, p.beta, p.sigma, x0)?)
}

/// Start used for the Monte Carlo rows: the middle of the configured starts.
fn mc_start(p: &AffineParams) -> f64 {
    p.x0s[p.x0s.len() / 2]
}

/// `log E e^{u z(t)}` for real `u` from the mean and variance ODEs of the OU
/// model (the law is Gaussian).
fn ou_moment_route(m: &AffineModel, t: f64, u: f64) -> Result<f64, HarnessError> {
    let (b, beta, s2) = (m.b, m.beta, m.sigma * m.sigma);
    let x = dormand_prince(|x: &[f64; 2]| [b - beta * x[0], -2.0 * beta * x[1] + 2.0 * s2], [m.x0, 0.0], t, 1e-13, 1e-15)?;
    Ok(u * x[0] + 0.5 * u * u * x[1])
}

/// `log E e^{u y(t)}` for the CIR model from its transition law: `y(t)/c` is
/// noncentral chi-square, written as a Poisson mixture of central ones.
fn cir_transition_route(m: &AffineModel, t: f64, u: f64) -> f64 {
    let e = (-m.beta * t).exp();
    let c = m.sigma * m.sigma * (1.0 - e) / (2.0 * m.beta);
    let k = 2.0 * m.b / (m.sigma * m.sigma);
    let half_nc = 0.5 * m.x0 * e / c;
    let q = 1.0 / (1.0 - 2.0 * u * c);
    // Σ_j Pois(j; half_nc) q^{k/2 + j}, summed in log space.
    let mut log_w = -half_nc;
    let mut acc = 0.0;
    let mut j = 0usize;
    loop {
        let term = (log_w + j as f64 * q.ln()).exp();
        acc += term;
        if (j as f64) > half_nc && term < 1e-18 * acc {
            break;
        }
        j += 1;
        log_w += half_nc.ln() - (j as f64).ln();
        if half_nc == 0.0 {
            break;
        }
    }
    0.5 * k * q.ln() + acc.ln()
}

pub(crate) fn affine_ou(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.affine_ou;
    let mut rows = Vec::new();
    let mut table = Table::new(&["x0", "u", "riccati", "moment_route", "difference"]);
    let mut worst_route: f64 = 0.0;
    let mut worst_col: f64 = 0.0;
    let mut series = Vec::new();
    for &u in &p.us {
        let mut logs = Vec::new();
        for &x0 in &p.x0s {
            let m = model(AffineKind::Ou, p, x0)?;
            let (psi, phi) = ou_psi_phi(&m, p.t, Complex64::new(u, 0.0));
            let ric = x0 * psi.re + phi.re;
            let mom = ou_moment_route(&m, p.t, u)?;
            worst_route = worst_route.max((ric - mom).abs());
            table.push(cells![x0, u, ric, mom, ric - mom]);
            logs.push(mom);
        }
        worst_col = worst_col.max(collinearity_residual(&p.x0s, &logs));
        series.push(Series::line(&format!("u = {u}"), p.x0s.iter().copied().zip(logs).collect()));
    }
    rows.push(Row::at_most("closed-form Riccati vs moment ODEs, log transform", worst_route, p.flow_tol));
    rows.push(Row::at_most("log transform affine in x0 (moment route), worst residual", worst_col, p.collinearity_tol));

    let m0 = model(AffineKind::Ou, p, 0.0)?;
    let mut worst_flow: f64 = 0.0;
    for &u in &p.us {
        let u = Complex64::new(0.0, u);
        let (s, r) = (0.4 * p.t, 0.6 * p.t);
        let (ps, fs) = ou_psi_phi(&m0, s, u);
        let (pr, fr) = ou_psi_phi(&m0, r, ps);
        let (pt, ft) = ou_psi_phi(&m0, s + r, u);
        worst_flow = worst_flow.max((pr - pt).norm()).max((fs + fr - ft).norm());
    }
    rows.push(Row::at_most("flow: ψ(s+r,u) = ψ(r,ψ(s,u)), φ(s+r,u) = φ(s,u) + φ(r,ψ(s,u))", worst_flow, p.flow_tol));

    let x0 = mc_start(p);
    let m = model(AffineKind::Ou, p, x0)?;
    let ends = euler_maruyama(&m, p.em_dt, p.t, ctx.config.replicas_or(p.em_replicas), ctx.sub_seed("euler-maruyama"))?;
    for &v in &p.us {
        let target = ou_transform(&m, p.t, Complex64::new(0.0, v))?;
        let re: Vec<f64> = ends.iter().map(|x| (v * x).cos()).collect();
        let im: Vec<f64> = ends.iter().map(|x| (v * x).sin()).collect();
        let (mr, sr) = stats::mean_se(&re);
        let (mi, si) = stats::mean_se(&im);
        rows.push(Row::z_test(format!("Euler-Maruyama Re E e^(i{v} z(t)), x0 = {x0}"), target.re, mr, sr));
        rows.push(Row::z_test(format!("Euler-Maruyama Im E e^(i{v} z(t)), x0 = {x0}"), target.im, mi, si));
    }
    let plot = Plot {
        title: "OU log transform against the initial state".into(),
        x_label: "x0".into(),
        y_label: "log E exp(u z(t))".into(),
        series,
        ..Plot::default()
    };
    let notes = vec![format!(
        "dz = (b - βz)dt + √2σ dB with b = {}, β = {}, σ = {}, t = {}; Euler-Maruyama dt = {}",
        p.b, p.beta, p.sigma, p.t, p.em_dt
    )];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}

/// `-log E exp(-<ψ, Z_t>)` under `μ` and `2μ` for a branching power `beta`.
fn measure_ratio(beta: f64, mu: &InitialMeasure) -> Result<f64, HarnessError> {
    let t = 1.0;
    let grid = PeriodicGrid::padded(1, 4.0, 1.0, t, 128)?;
    let bump = GaussianBump { center: 0.0, width: 0.5, weight: 1.0 };
    let problem = DualProblem::new(grid.clone(), catalyst_kernel(), grid.sample(|x| bump.value(x[0])), Forcing::Constant(0.2), beta, 0.0, t)?;
    let opts = SolveOptions::new(0.01);
    let one = -laplace_functional(mu, &problem, &opts)?.ln();
    let two = -laplace_functional(&mu.scaled(2.0), &problem, &opts)?.ln();
    Ok(two / one)
}

pub(crate) fn affine_cir(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.affine_cir;
    let mut rows = Vec::new();
    let mut table = Table::new(&["x0", "u", "riccati_rk45", "closed_form", "transition_law"]);
    let (mut worst_cf, mut worst_tl, mut worst_col): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut series = Vec::new();
    for &u in &p.us {
        let mut logs = Vec::new();
        for &x0 in &p.x0s {
            let m = model(AffineKind::Cir, p, x0)?;
            let (psi, phi) = cir_psi_phi(&m, p.t, u)?;
            let rk = x0 * psi + phi;
            let (pc, fc) = cir_closed_form(&m, p.t, u);
            let cf = x0 * pc + fc;
            let tl = cir_transition_route(&m, p.t, u);
            worst_cf = worst_cf.max((rk - cf).abs());
            worst_tl = worst_tl.max((rk - tl).abs());
            table.push(cells![x0, u, rk, cf, tl]);
            logs.push(tl);
        }
        worst_col = worst_col.max(collinearity_residual(&p.x0s, &logs));
        series.push(Series::line(&format!("u = {u}"), p.x0s.iter().copied().zip(logs).collect()));
    }
    rows.push(Row::at_most("RK45 Riccati vs closed form, log transform", worst_cf, p.flow_tol));
    rows.push(Row::at_most("RK45 Riccati vs noncentral chi-square transition law", worst_tl, p.flow_tol));
    rows.push(Row::at_most("log transform affine in x0 (transition-law route), worst residual", worst_col, p.collinearity_tol));

    let m0 = model(AffineKind::Cir, p, 0.0)?;
    let mut worst_flow: f64 = 0.0;
    for &u in &p.us {
        let (s, r) = (0.4 * p.t, 0.6 * p.t);
        let (ps, fs) = cir_psi_phi(&m0, s, u)?;
        let (pr, fr) = cir_psi_phi(&m0, r, ps)?;
        let (pt, ft) = cir_psi_phi(&m0, s + r, u)?;
        worst_flow = worst_flow.max((pr - pt).abs()).max((fs + fr - ft).abs());
    }
    rows.push(Row::at_most("flow: ψ(s+r,u) = ψ(r,ψ(s,u)), φ(s+r,u) = φ(s,u) + φ(r,ψ(s,u))", worst_flow, p.flow_tol));

    let x0 = mc_start(p);
    let m = model(AffineKind::Cir, p, x0)?;
    let ends = euler_maruyama(&m, p.em_dt, p.t, ctx.config.replicas_or(p.em_replicas), ctx.sub_seed("euler-maruyama"))?;
    for &u in &p.us {
        let target = cir_transform(&m, p.t, u)?;
        let vals: Vec<f64> = ends.iter().map(|y| (u * y).exp()).collect();
        let (mv, sv) = stats::mean_se(&vals);
        rows.push(Row::z_test(format!("Euler-Maruyama E e^({u} y(t)), x0 = {x0}"), target, mv, sv));
    }

    // Measure-valued state: -log L(2μ) = -2 log L(μ).
    let atom = InitialMeasure::Atom { x: vec![0.3], mass: 0.7 };
    let particles = InitialMeasure::Particles(ParticleMeasure::uniform_1d(-1.0, 1.0, 50, 1.0));
    for &beta in &[1.0, 0.5] {
        for (name, mu) in [("atom", &atom), ("particles", &particles)] {
            let ratio = measure_ratio(beta, mu)?;
            rows.push(Row::within(format!("log-Laplace ratio for 2μ vs μ, β = {beta}, {name}"), 2.0, ratio, 1e-8));
        }
    }
    let plot = Plot {
        title: "CIR log transform against the initial state".into(),
        x_label: "x0".into(),
        y_label: "log E exp(u y(t))".into(),
        series,
        ..Plot::default()
    };
    let notes = vec![format!(
        "dy = (b - βy)dt + σ√(2y) dB with b = {}, β = {}, σ = {}, t = {}; full-truncation Euler-Maruyama dt = {}",
        p.b, p.beta, p.sigma, p.t, p.em_dt
    )];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}
