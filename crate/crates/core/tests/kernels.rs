use catalytic_ou::kernels::{
    apply_semigroup, dirichlet_eigensystem, g_phi, g_phi_tau, heat_kernel, GaussianBump, HeatKernelParams,
    HeatPropagator, PeriodicGrid, Support,
};
use catalytic_ou::quad::{integrate, integrate_line, QuadOptions};
use proptest::prelude::*;
use std::f64::consts::PI;

fn half() -> HeatKernelParams {
    HeatKernelParams::gaussian(0.5, 1)
}

#[test]
fn standard_normal_density_at_origin() {
    let p = heat_kernel(1.0, &[0.0], &[0.0], &half()).unwrap();
    assert!((p - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
}

#[test]
fn two_dimensional_kernel_factorises() {
    let p2 = HeatKernelParams::gaussian(0.5, 2);
    let v = heat_kernel(0.7, &[0.1, -0.4], &[0.5, 0.2], &p2).unwrap();
    let a = heat_kernel(0.7, &[0.1], &[0.5], &half()).unwrap();
    let b = heat_kernel(0.7, &[-0.4], &[0.2], &half()).unwrap();
    assert!((v - a * b).abs() < 1e-15);
}

#[test]
fn rejects_bad_arguments() {
    assert!(heat_kernel(0.0, &[0.0], &[0.0], &half()).is_err());
    assert!(heat_kernel(1.0, &[0.0, 0.0], &[0.0], &half()).is_err());
    assert!(HeatKernelParams::new(1.0, 1, 2.5).is_err());
    assert!(HeatKernelParams::new(-1.0, 1, 2.0).is_err());
    let stable = HeatKernelParams::new(1.0, 1, 1.5).unwrap();
    assert!(heat_kernel(1.0, &[0.0], &[0.0], &stable).is_err());
}

#[test]
fn semigroup_preserves_constants() {
    let grid = PeriodicGrid::new(1, -5.0, 5.0, 128).unwrap();
    let out = apply_semigroup(&grid, &vec![2.5; 128], 0.8, &half()).unwrap();
    assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-13));
}

#[test]
fn semigroup_matches_closed_form_on_a_bump() {
    let params = HeatKernelParams::gaussian(1.0, 1);
    let grid = PeriodicGrid::padded(1, 4.0, 1.0, 1.0, 512).unwrap();
    let bump = GaussianBump { center: 0.3, width: 0.4, weight: 1.5 };
    let out = apply_semigroup(&grid, &grid.sample(|x| bump.value(x[0])), 1.0, &params).unwrap();
    let worst = (0..grid.len()).map(|i| (out[i] - bump.heat_convolve(1.0, grid.coord(i), 1.0)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn zero_time_is_identity() {
    let grid = PeriodicGrid::new(1, 0.0, 1.0, 64).unwrap();
    let f = grid.sample(|x| (2.0 * PI * x[0]).sin() + x[0]);
    let prop = HeatPropagator::new(&grid, &half()).unwrap();
    let out = prop.apply(&f, 0.0).unwrap();
    assert!(f.iter().zip(&out).all(|(a, b)| (a - b).abs() < 1e-13));
    assert!(prop.apply(&f, -1.0).is_err());
}

#[test]
fn g_phi_of_one_is_one() {
    let v = g_phi(&|_| 1.0, Support::Line, 1.0, 0.3, 0.2, &half()).unwrap();
    assert!((v - 1.0).abs() < 1e-9);
    assert!(g_phi(&|_| 1.0, Support::Line, 1.0, 1.0, 0.2, &half()).is_err());
}

#[test]
fn g_phi_of_a_bump_matches_closed_form() {
    let bump = GaussianBump { center: -0.2, width: 0.3, weight: 1.0 };
    for &(tau, z) in &[(0.1, 0.0), (0.5, 1.0), (2.0, -1.5)] {
        let q = g_phi_tau(&|x| bump.value(x), bump.support(), tau, z, &half()).unwrap();
        assert!((q - bump.heat_convolve(tau, z, 0.5)).abs() < 1e-9);
    }
}

#[test]
fn g_phi_tends_to_phi_as_elapsed_time_vanishes() {
    let bump = GaussianBump { center: 0.0, width: 0.5, weight: 1.0 };
    let z = 0.25;
    let mut prev = f64::INFINITY;
    for tau in [1e-2, 1e-3, 1e-4] {
        let err = (g_phi_tau(&|x| bump.value(x), bump.support(), tau, z, &half()).unwrap() - bump.value(z)).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-3);
}

#[test]
fn first_dirichlet_eigenvalue() {
    let e = dirichlet_eigensystem(1, 0.5, 8).unwrap();
    assert!((e.lambdas[0] - PI * PI / 2.0).abs() < 1e-12);
    assert!(e.lambdas.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn eigenfunctions_are_orthonormal() {
    let e = dirichlet_eigensystem(1, 0.5, 12).unwrap();
    let opts = QuadOptions::with_tol(1e-13, 1e-12);
    for j in 0..e.len() {
        for k in 0..e.len() {
            let ip = integrate(|x| e.phi(j, &[x]) * e.phi(k, &[x]), 0.0, 1.0, opts).unwrap().value;
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-10, "({j}, {k}) {ip}");
        }
    }
}

#[test]
fn eigenfunctions_solve_the_eigen_equation() {
    // Second differences converge to κ φ'' = -λ φ at rate h².
    let e = dirichlet_eigensystem(1, 0.5, 4).unwrap();
    let x = 0.37;
    let mut prev = f64::INFINITY;
    for h in [1e-2, 5e-3, 2.5e-3] {
        let lap = (e.phi(3, &[x + h]) - 2.0 * e.phi(3, &[x]) + e.phi(3, &[x - h])) / (h * h);
        let err = (0.5 * lap + e.lambdas[3] * e.phi(3, &[x])).abs();
        assert!(err < prev);
        prev = err;
    }
}

#[test]
fn sobolev_weight_series() {
    let e = dirichlet_eigensystem(1, 0.5, 200).unwrap();
    let (head, tail) = e.sobolev_weight_sum(1.0);
    assert!(head.is_finite() && tail.is_finite() && tail > 0.0);
    // Long partial sum as the oracle.
    let oracle: f64 = (1..200_000).map(|k| 1.0 / (1.0 + 0.5 * (k as f64 * PI).powi(2))).sum();
    assert!(head <= oracle && oracle <= head + tail);
    assert!(e.sobolev_weight_sum(0.5).1.is_infinite());
    let e2 = dirichlet_eigensystem(2, 0.5, 50).unwrap();
    assert!(e2.sobolev_weight_sum(1.0).1.is_infinite());
}

proptest! {
    #[test]
    fn kernel_is_symmetric(t in 0.01f64..5.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let a = heat_kernel(t, &[x], &[y], &half()).unwrap();
        let b = heat_kernel(t, &[y], &[x], &half()).unwrap();
        prop_assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
    }

    #[test]
    fn kernel_integrates_to_one(t in 0.01f64..5.0, x in -3.0f64..3.0) {
        let m = integrate_line(|y| heat_kernel(t, &[x], &[y], &half()).unwrap(), QuadOptions::with_tol(1e-12, 1e-11)).unwrap().value;
        prop_assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chapman_kolmogorov(s in 0.05f64..2.0, t in 0.05f64..2.0, x in -2.0f64..2.0, z in -2.0f64..2.0) {
        let lhs = integrate_line(
            |y| heat_kernel(s, &[x], &[y], &half()).unwrap() * heat_kernel(t, &[y], &[z], &half()).unwrap(),
            QuadOptions::with_tol(1e-13, 1e-11),
        ).unwrap().value;
        let rhs = heat_kernel(s + t, &[x], &[z], &half()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8 * rhs.max(1e-3));
    }

    #[test]
    fn grid_semigroup_composes(s in 0.0f64..1.0, t in 0.0f64..1.0, c in -1.0f64..1.0) {
        let grid = PeriodicGrid::new(1, -6.0, 6.0, 128).unwrap();
        let f = grid.sample(|x| (-(x[0] - c).powi(2)).exp());
        let prop = HeatPropagator::new(&grid, &half()).unwrap();
        let two = prop.apply(&prop.apply(&f, s).unwrap(), t).unwrap();
        let one = prop.apply(&f, s + t).unwrap();
        let worst = two.iter().zip(&one).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-12);
    }
}
