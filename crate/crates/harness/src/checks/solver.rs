use super::common::catalyst_kernel;
use super::{Body, Ctx};
use crate::cells;
use crate::error::HarnessError;
use crate::plot::{Plot, Series};
use crate::report::{Row, Table};
use catalytic_ou::dual_pde::{picard_volterra_oracle, solve_dual, DualProblem, Forcing, ReactionScheme, SolveOptions};
use catalytic_ou::kernels::{dirichlet_eigensystem, heat_kernel, GaussianBump, HeatPropagator, PeriodicGrid};
use catalytic_ou::quad::{integrate, integrate_line, QuadOptions};

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bump_problem(grid: &PeriodicGrid, t: f64, forcing: Forcing) -> Result<DualProblem, HarnessError> {
    let bump = GaussianBump { center: 0.0, width: 0.5, weight: 1.0 };
    Ok(DualProblem::new(grid.clone(), catalyst_kernel(), grid.sample(|x| bump.value(x[0])), forcing, 1.0, 0.0, t)?)
}

pub(crate) fn dual_convergence(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.dual_convergence;
    let grid = PeriodicGrid::padded(1, 4.0, 1.0, p.t, p.grid_n)?;
    let exact = p.lambda / (1.0 + p.lambda * p.t);
    let flat = DualProblem::new(grid.clone(), catalyst_kernel(), vec![p.lambda; grid.len()], Forcing::Zero, 1.0, 0.0, p.t)?;
    let mut table = Table::new(&["dt", "implicit_midpoint_error", "riccati_error", "ratio"]);
    let mut errs = Vec::new();
    let mut rows = Vec::new();
    for &dt in &p.dts {
        let mid = solve_dual(&flat, &SolveOptions::new(dt).scheme(ReactionScheme::ImplicitMidpoint))?;
        let ric = solve_dual(&flat, &SolveOptions::new(dt))?;
        let e = mid.last().iter().map(|u| (u - exact).abs()).fold(0.0, f64::max);
        let er = ric.last().iter().map(|u| (u - exact).abs()).fold(0.0, f64::max);
        let ratio = errs.last().map(|&(_, prev, _): &(f64, f64, f64)| prev / e).unwrap_or(f64::NAN);
        table.push(cells![dt, e, er, if ratio.is_nan() { String::new() } else { format!("{ratio}") }]);
        errs.push((dt, e, er));
    }
    for w in errs.windows(2) {
        rows.push(Row::inside(
            format!("error ratio dt = {} -> {}", w[0].0, w[1].0),
            w[0].1 / w[1].1,
            p.ratio_band[0],
            p.ratio_band[1],
            true,
        ));
    }
    let worst_ric = errs.iter().map(|e| e.2).fold(0.0, f64::max);
    rows.push(Row::at_most("exact Riccati reaction step: max error over dt", worst_ric, 1e-12));

    // Independent mild-form oracle on a problem with spatial structure and forcing.
    let bump = bump_problem(&grid, p.t, Forcing::Constant(0.5))?;
    let split = solve_dual(&bump, &SolveOptions::new(p.picard_dt))?;
    let oracle = picard_volterra_oracle(&bump, p.picard_dt, 200)?;
    let d = sup_diff(split.last(), oracle.last());
    rows.push(Row::at_most("splitting solver vs Picard/Volterra oracle, sup norm", d, p.picard_tol));

    let fit = catalytic_ou::stats::loglog_fit(
        &errs.iter().map(|e| e.0).collect::<Vec<_>>(),
        &errs.iter().map(|e| e.1).collect::<Vec<_>>(),
    );
    let plot = Plot {
        title: "Dual solver convergence".into(),
        x_label: "dt".into(),
        y_label: "sup error at t".into(),
        log_x: true,
        log_y: true,
        series: vec![Series::line("implicit midpoint", errs.iter().map(|e| (e.0, e.1)).collect())],
        annotation: Some(format!("fitted order {:.3}", fit.slope)),
    };
    let notes = vec![
        format!("constant data λ = {} against λ/(1+λt) at t = {}", p.lambda, p.t),
        format!("oracle used {} Picard sweeps at dt = {}", oracle.iterations, p.picard_dt),
    ];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}

pub(crate) fn propagator_compose(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.compose;
    let grid = PeriodicGrid::padded(1, 4.0, 1.0, p.t, p.grid_n)?;
    let problem = bump_problem(&grid, p.t, Forcing::Constant(0.5))?;
    let opts = SolveOptions::new(p.dt);
    let one_shot = solve_dual(&problem, &opts)?.last().to_vec();
    let half = solve_dual(&problem, &SolveOptions::new(0.5 * p.dt))?.last().to_vec();
    let tol = sup_diff(&one_shot, &half);
    let first = solve_dual(&problem.restarted(problem.psi.clone(), 0.0, p.split), &opts)?.last().to_vec();
    let composed = solve_dual(&problem.restarted(first, p.split, p.t), &opts)?.last().to_vec();
    let comp_err = sup_diff(&one_shot, &composed);
    let mut rows = vec![Row::at_most(
        format!("U(t,r)U(r,0) vs U(t,0) at r = {}, sup norm (limit {}x the step-halving difference)", p.split, p.factor),
        comp_err,
        p.factor * tol,
    )];

    // Ordering: larger data gives a larger solution.
    let bigger = problem.restarted(problem.psi.iter().map(|v| 1.5 * v + 0.1).collect(), 0.0, p.t);
    let ub = solve_dual(&bigger, &opts)?.last().to_vec();
    rows.push(Row::flag("comparison: ψ1 <= ψ2 implies u1(t) <= u2(t)", ub.iter().zip(&one_shot).all(|(b, a)| b >= a)));

    // Heat semigroup on the grid.
    let prop = HeatPropagator::new(&grid, &catalyst_kernel())?;
    let f = problem.psi.clone();
    let two = prop.apply(&prop.apply(&f, p.split)?, p.t - p.split)?;
    let one = prop.apply(&f, p.t)?;
    rows.push(Row::at_most("grid semigroup: S(t-r)S(r) vs S(t)", sup_diff(&one, &two), 1e-12));

    // Chapman-Kolmogorov by quadrature.
    let params = catalyst_kernel();
    let mut ck_worst: f64 = 0.0;
    let opts_q = QuadOptions::with_tol(1e-14, 1e-12);
    let mut table = Table::new(&["s", "t", "x", "y", "composed", "direct", "relative_error"]);
    for &(s, t, x, y) in &[(0.3, 1.0, 0.0, 0.5), (0.5, 2.0, -1.0, 1.0), (0.05, 0.2, 0.2, 0.1), (1.5, 1.7, 0.0, 3.0)] {
        let direct = heat_kernel(t, &[x], &[y], &params)?;
        let composed = integrate_line(
            |z| heat_kernel(s, &[x], &[z], &params).unwrap_or(f64::NAN) * heat_kernel(t - s, &[z], &[y], &params).unwrap_or(f64::NAN),
            opts_q,
        )?
        .value;
        let rel = (composed - direct).abs() / direct;
        ck_worst = ck_worst.max(rel);
        table.push(cells![s, t, x, y, composed, direct, rel]);
    }
    rows.push(Row::at_most("Chapman-Kolmogorov, worst relative error", ck_worst, 1e-10));

    // Orthonormality of the Dirichlet eigenfunctions on [0, 1].
    let eig = dirichlet_eigensystem(1, 0.5, 32)?;
    let mut ortho: f64 = 0.0;
    for j in 0..eig.len() {
        for k in j..eig.len() {
            let v = integrate(|x| eig.phi(j, &[x]) * eig.phi(k, &[x]), 0.0, 1.0, QuadOptions::with_tol(1e-14, 1e-13))?.value;
            ortho = ortho.max((v - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    rows.push(Row::at_most(format!("orthonormality of {} Dirichlet modes, worst entry", eig.len()), ortho, 1e-10));

    let plot = Plot {
        title: "Composed vs one-shot dual solution".into(),
        x_label: "x".into(),
        y_label: "u(t, x)".into(),
        series: vec![
            Series::line("one-shot", (0..grid.len()).map(|i| (grid.coord(i), one_shot[i])).collect()),
            Series::line("composed", (0..grid.len()).map(|i| (grid.coord(i), composed[i])).collect()),
        ],
        annotation: Some(format!("sup difference {comp_err:.2e}")),
        ..Plot::default()
    };
    let notes = vec![format!(
        "split r = {} and dt = {}: the split is not a multiple of dt; step-halving difference {tol:.3e}",
        p.split, p.dt
    )];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}
