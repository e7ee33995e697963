use catalytic_ou::dual_pde::{
    laplace_functional, picard_volterra_oracle, riccati_step, solve_dual, DualProblem, Forcing, InitialMeasure,
    ReactionScheme, SolveOptions,
};
use catalytic_ou::kernels::{GaussianBump, HeatKernelParams, PeriodicGrid};
use proptest::prelude::*;

fn grid() -> PeriodicGrid {
    PeriodicGrid::padded(1, 4.0, 1.0, 1.0, 128).unwrap()
}

fn problem(psi: Vec<f64>, forcing: Forcing, beta: f64, t: f64) -> DualProblem {
    DualProblem::new(grid(), HeatKernelParams::gaussian(1.0, 1), psi, forcing, beta, 0.0, t).unwrap()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn constant_data_follows_the_riccati_ode() {
    let n = grid().len();
    for &(lam, t) in &[(1.0, 1.0), (0.3, 2.0), (5.0, 0.5)] {
        let sol = solve_dual(&problem(vec![lam; n], Forcing::Zero, 1.0, t), &SolveOptions::new(0.01)).unwrap();
        let want = lam / (1.0 + lam * t);
        assert!(sol.last().iter().all(|v| (v - want).abs() < 1e-12), "λ = {lam}");
    }
}

#[test]
fn constant_forcing_from_zero_gives_tanh() {
    let n = grid().len();
    let c: f64 = 0.7;
    let t = 1.3;
    let sol = solve_dual(&problem(vec![0.0; n], Forcing::Constant(c), 1.0, t), &SolveOptions::new(0.01)).unwrap();
    let want = c.sqrt() * (c.sqrt() * t).tanh();
    assert!(sol.last().iter().all(|v| (v - want).abs() < 1e-12));
    assert!((riccati_step(0.0, c, t) - want).abs() < 1e-14);
}

#[test]
fn sub_quadratic_branching_on_constants() {
    // u' = -u^{1+β} has u(t) = (λ^{-β} + βt)^{-1/β}.
    let n = grid().len();
    let (lam, beta, t): (f64, f64, f64) = (2.0, 0.5, 1.0);
    let want = (lam.powf(-beta) + beta * t).powf(-1.0 / beta);
    let mut prev = f64::INFINITY;
    for dt in [0.04, 0.02, 0.01] {
        let sol = solve_dual(&problem(vec![lam; n], Forcing::Zero, beta, t), &SolveOptions::new(dt)).unwrap();
        let err = (sol.last()[0] - want).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 3e-5, "{prev}");
}

#[test]
fn zero_data_stays_zero() {
    let n = grid().len();
    let sol = solve_dual(&problem(vec![0.0; n], Forcing::Zero, 1.0, 1.0), &SolveOptions::new(0.05)).unwrap();
    assert!(sol.last().iter().all(|&v| v == 0.0));
}

#[test]
fn splitting_agrees_with_picard_oracle() {
    let g = grid();
    let bump = GaussianBump { center: 0.0, width: 0.5, weight: 1.0 };
    let p = problem(g.sample(|x| bump.value(x[0])), Forcing::Constant(0.3), 1.0, 1.0);
    let split = solve_dual(&p, &SolveOptions::new(0.0025)).unwrap();
    let picard = picard_volterra_oracle(&p, 0.0025, 200).unwrap();
    let d = sup_diff(split.last(), picard.last());
    assert!(d < 1e-4, "{d}");
}

#[test]
fn laplace_of_a_unit_atom() {
    let n = grid().len();
    let mu = InitialMeasure::Atom { x: vec![0.0], mass: 1.0 };
    let v = laplace_functional(&mu, &problem(vec![1.0; n], Forcing::Zero, 1.0, 1.0), &SolveOptions::new(0.01)).unwrap();
    assert!((v - (-0.5f64).exp()).abs() < 1e-12);
}

#[test]
fn invalid_problems_are_rejected() {
    let g = grid();
    let p = HeatKernelParams::gaussian(1.0, 1);
    let n = g.len();
    assert!(DualProblem::new(g.clone(), p, vec![-1.0; n], Forcing::Zero, 1.0, 0.0, 1.0).is_err());
    assert!(DualProblem::new(g.clone(), p, vec![1.0; n], Forcing::Zero, 1.5, 0.0, 1.0).is_err());
    assert!(DualProblem::new(g.clone(), p, vec![1.0; n - 1], Forcing::Zero, 1.0, 0.0, 1.0).is_err());
    assert!(DualProblem::new(g.clone(), p, vec![1.0; n], Forcing::Constant(-0.1), 1.0, 0.0, 1.0).is_err());
    assert!(DualProblem::new(g, p, vec![1.0; n], Forcing::Zero, 1.0, 1.0, 0.5).is_err());
}

#[test]
fn implicit_midpoint_is_second_order() {
    let n = grid().len();
    let want = 1.0 / 2.0;
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let opts = SolveOptions::new(dt).scheme(ReactionScheme::ImplicitMidpoint);
            let sol = solve_dual(&problem(vec![1.0; n], Forcing::Zero, 1.0, 1.0), &opts).unwrap();
            (sol.last()[0] - want).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((3.5..4.5).contains(&r), "{errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_principle(a in 0.1f64..3.0, extra in 0.0f64..2.0, c in 0.0f64..1.0, w in 0.2f64..1.0) {
        let g = grid();
        let lo = g.sample(|x| a * (-(x[0] / w).powi(2)).exp());
        let hi: Vec<f64> = lo.iter().map(|v| v + extra * v.sqrt()).collect();
        let opts = SolveOptions::new(0.02);
        let ul = solve_dual(&problem(lo, Forcing::Constant(c), 1.0, 1.0), &opts).unwrap();
        let uh = solve_dual(&problem(hi, Forcing::Constant(c + extra), 1.0, 1.0), &opts).unwrap();
        prop_assert!(ul.last().iter().zip(uh.last()).all(|(l, h)| *l <= h + 1e-12));
    }

    #[test]
    fn continuous_in_the_forcing(c in 0.0f64..2.0, eps in 0.0f64..0.1) {
        // Forcing enters additively and the reaction is dissipative, so the
        // sup-norm response is at most t times the perturbation.
        let g = grid();
        let psi = g.sample(|x| (-x[0] * x[0]).exp());
        let opts = SolveOptions::new(0.02);
        let t = 1.0;
        let a = solve_dual(&problem(psi.clone(), Forcing::Constant(c), 1.0, t), &opts).unwrap();
        let b = solve_dual(&problem(psi, Forcing::Constant(c + eps), 1.0, t), &opts).unwrap();
        prop_assert!(sup_diff(a.last(), b.last()) <= t * eps + 1e-12);
    }
}
