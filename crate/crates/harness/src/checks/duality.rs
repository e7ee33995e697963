use super::common::{catalyst_kernel, point_start_path, sbm_options};
use super::{Body, Ctx};
use crate::cells;
use crate::error::HarnessError;
use crate::plot::{Plot, Series};
use crate::report::{Row, Table};
use catalytic_ou::dual_pde::{
    char_laplace_exponent, pair_with_measure, riccati_step, solve_dual, CharLaplaceQuery, DualProblem, Forcing,
    InitialMeasure, SolveOptions,
};
use catalytic_ou::exec::try_map_replicas;
use catalytic_ou::gaussian_field::quenched_pairing_variance;
use catalytic_ou::kernels::{GaussianBump, PeriodicGrid};
use catalytic_ou::rng;
use catalytic_ou::stats;
use catalytic_ou::superprocess::{measure_pairing, occupation_integral, BranchingScheme, FnForcing, StepInTime};
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Half-width of the region of interest; the solver grid adds padding.
const HALF_WIDTH: f64 = 6.0;

fn origin() -> InitialMeasure {
    InitialMeasure::Atom { x: vec![0.0], mass: 1.0 }
}

/// `u(t)` assembled from restarted solves, one per piece of a step forcing
/// `r ↦ level(t - r) · profile` frozen at each piece's mid-time.
fn piecewise_solve(
    base: &DualProblem,
    profile: &[f64],
    level: impl Fn(f64) -> f64,
    pieces: usize,
    opts: &SolveOptions,
) -> Result<Vec<f64>, HarnessError> {
    let t = base.t1 - base.t0;
    let mut u = base.psi.clone();
    for j in 0..pieces {
        let (r0, r1) = (t * j as f64 / pieces as f64, t * (j + 1) as f64 / pieces as f64);
        let lv = level(t - 0.5 * (r0 + r1));
        let mut p = base.restarted(u, r0, r1);
        p.forcing = Forcing::Static(profile.iter().map(|v| v * lv).collect());
        u = solve_dual(&p, opts)?.last().to_vec();
    }
    Ok(u)
}

pub(crate) fn occupation_laplace(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.occupation;
    let replicas = ctx.config.replicas_or(p.replicas);
    let grid = PeriodicGrid::padded(1, HALF_WIDTH, 1.0, p.t, p.grid_n)?;
    let opts = SolveOptions::new(p.dual_dt);
    let mu = origin();

    // Pair A: constants. Pair B: bump ψ and a forcing that jumps at s = t/2.
    let (psi_c, phi_c) = (0.5, 0.5);
    let bump = GaussianBump { center: 0.0, width: 0.5, weight: 1.0 };
    let profile = Arc::new(move |x: &[f64]| bump.value(x[0]));
    let step = Arc::new(StepInTime::new(vec![0.0, 0.5 * p.t], vec![0.5, 2.0], profile.clone())?);

    let seed = ctx.sub_seed("paths");
    let sopts = sbm_options(p.n_scale, p.t, p.dt, ctx.config.population_cap, BranchingScheme::Exact);
    let samples = try_map_replicas(replicas, |r| -> catalytic_ou::Result<[f64; 2]> {
        let path = point_start_path(&sopts, rng::child_seed(seed, "catalyst", r as u64))?;
        let end = &path.states[path.states.len() - 1];
        let a = psi_c * end.total_mass() + occupation_integral(&path, &FnForcing(|_: f64, _: &[f64]| phi_c));
        let b = measure_pairing(end, &|x| bump.value(x[0])) + occupation_integral(&path, step.as_ref());
        Ok([(-a).exp(), (-b).exp()])
    })?;

    let params = catalyst_kernel();
    let prob_a = DualProblem::new(grid.clone(), params, vec![psi_c; grid.len()], Forcing::Constant(phi_c), 1.0, 0.0, p.t)?;
    let ua = solve_dual(&prob_a, &opts)?;
    let exact_a = riccati_step(psi_c, phi_c, p.t);
    let dual_a = pair_with_measure(&grid, ua.last(), &mu)?;
    let psi_b = grid.sample(|x| bump.value(x[0]));
    let prob_b = DualProblem::new(grid.clone(), params, psi_b, Forcing::from_catalyst_time(&grid, p.t, step.clone()), 1.0, 0.0, p.t)?;
    let dual_b = pair_with_measure(&grid, solve_dual(&prob_b, &opts)?.last(), &mu)?;

    let col = |k: usize| samples.iter().map(|s| s[k]).collect::<Vec<f64>>();
    let (ma, sa) = stats::mean_se(&col(0));
    let (mb, sb) = stats::mean_se(&col(1));
    let mut rows = vec![
        Row::within("constant pair: solver vs exact Riccati value", exact_a, dual_a, 1e-6),
        Row::z_test("constant pair: MC vs exp(-<u(t),μ>)", (-dual_a).exp(), ma, sa),
        Row::z_test("bump ψ with step Φ: MC vs exp(-<u(t),μ>)", (-dual_b).exp(), mb, sb),
    ];

    // Step-function approximations of the continuous level 0.5 + s.
    let level = |s: f64| 0.5 + s;
    let prof_grid = grid.sample(|x| profile(x));
    let cont = Arc::new(FnForcing(move |s: f64, x: &[f64]| level(s) * bump.value(x[0])));
    let prob_c = DualProblem::new(grid.clone(), params, grid.sample(|x| bump.value(x[0])), Forcing::from_catalyst_time(&grid, p.t, cont), 1.0, 0.0, p.t)?;
    let fine = SolveOptions::new(p.dual_dt / 4.0);
    let reference = solve_dual(&prob_c, &fine)?.last().to_vec();
    let mut errs = Vec::new();
    for &n in &p.step_pieces {
        let u = piecewise_solve(&prob_c, &prof_grid, level, n, &fine)?;
        let e = u.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errs.push((n, e));
    }
    let decreasing = errs.windows(2).all(|w| w[1].1 < w[0].1);
    rows.push(Row::flag(
        format!("step-function propagators converge: sup errors {}", errs.iter().map(|(n, e)| format!("N={n}: {e:.2e}")).collect::<Vec<_>>().join(", ")),
        decreasing,
    ));
    let (n_last, e_last) = errs[errs.len() - 1];
    let (n_first, e_first) = errs[0];
    let order = (e_first / e_last).ln() / (n_last as f64 / n_first as f64).ln();

    let mut table = Table::new(&["quantity", "analytic", "estimate", "se"]);
    table.push(cells!["constant pair", (-dual_a).exp(), ma, sa]);
    table.push(cells!["step pair", (-dual_b).exp(), mb, sb]);
    for &(n, e) in &errs {
        table.push(cells![format!("step pieces {n}: sup error"), 0.0, e, ""]);
    }
    let plot = Plot {
        title: "Step-in-time forcing: propagator error".into(),
        x_label: "pieces".into(),
        y_label: "sup |u_N(t) - u(t)|".into(),
        log_x: true,
        log_y: true,
        series: vec![Series::line("error", errs.iter().map(|&(n, e)| (n as f64, e.max(1e-300))).collect())],
        annotation: Some(format!("observed order {order:.2}")),
    };
    let notes = vec![
        format!("catalyst: N = {} particles from δ0, dt = {}; dual dt = {}", p.n_scale, p.dt, p.dual_dt),
        format!("constant pair ψ = {psi_c}, Φ = {phi_c}; step pair Φ = (0.5 on [0, t/2), 2 after) × bump"),
    ];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}

pub(crate) fn char_laplace(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.char_laplace;
    let replicas = ctx.config.replicas_or(p.replicas);
    let field_kappa = 0.5;
    let grid = PeriodicGrid::padded(1, HALF_WIDTH, 1.0, p.t, p.grid_n)?;
    let bump = GaussianBump { center: p.bump_center, width: p.bump_width, weight: p.bump_weight };
    let seed = ctx.sub_seed("paths");
    let sopts = sbm_options(p.n_scale, p.t, p.dt, ctx.config.population_cap, BranchingScheme::Exact);
    let g = |tau: f64, z: &[f64]| bump.heat_convolve(tau, z[0], field_kappa);
    // Per replica: sampled <φ, X_t>, its conditional variance, and <1, Z_t>.
    let samples = try_map_replicas(replicas, |r| -> catalytic_ou::Result<[f64; 3]> {
        let path = point_start_path(&sopts, rng::child_seed(seed, "catalyst", r as u64))?;
        let v = quenched_pairing_variance(&path, &g, p.t)?;
        let xi: f64 = rng::stream(seed, "field", r as u64).sample(StandardNormal);
        Ok([v.sqrt() * xi, v, path.states[path.states.len() - 1].total_mass()])
    })?;
    let opts = SolveOptions::new(p.dual_dt);
    let mut rows = Vec::new();
    let mut table = Table::new(&["lambda", "analytic", "estimate", "se", "conditional_estimate", "conditional_se"]);
    let mut pts = Vec::new();
    for &lambda in &p.lambdas {
        let q = CharLaplaceQuery {
            grid: grid.clone(),
            catalyst: catalyst_kernel(),
            field_kappa,
            phi: grid.sample(|x| bump.value(x[0])),
            lambda: vec![lambda; grid.len()],
            t: p.t,
            beta: 1.0,
        };
        let target = char_laplace_exponent(&origin(), &q, &opts)?;
        let direct: Vec<f64> = samples.iter().map(|s| s[0].cos() * (-lambda * s[2]).exp()).collect();
        let cond: Vec<f64> = samples.iter().map(|s| (-0.5 * s[1] - lambda * s[2]).exp()).collect();
        let (m, se) = stats::mean_se(&direct);
        let (mc, sec) = stats::mean_se(&cond);
        rows.push(Row::z_test(format!("λ = {lambda}: E cos<φ,X_t> e^(-λ<1,Z_t>) vs dual"), target, m, se));
        rows.push(Row::z_test(format!("λ = {lambda}: E e^(-V/2 - λ<1,Z_t>) vs dual"), target, mc, sec));
        table.push(cells![lambda, target, m, se, mc, sec]);
        pts.push((lambda, target, m));
    }
    let plot = Plot {
        title: "Characteristic-Laplace functional".into(),
        x_label: "λ".into(),
        y_label: "value".into(),
        series: vec![
            Series::markers("dual solver", pts.iter().map(|p| (p.0, p.1)).collect()),
            Series::markers("end-to-end MC", pts.iter().map(|p| (p.0, p.2)).collect()),
        ],
        ..Plot::default()
    };
    let notes = vec![format!(
        "φ = {} N({}, {}²), field generator ½Δ, catalyst N = {} from δ0, dt = {}; dual forcing ½ G_φ²",
        p.bump_weight, p.bump_center, p.bump_width, p.n_scale, p.dt
    )];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}
