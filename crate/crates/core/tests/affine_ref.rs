use catalytic_ou::affine_ref::{
    cir_closed_form, cir_psi_phi, cir_transform, euler_maruyama, ou_psi_phi, ou_transform, AffineKind, AffineModel,
};
use catalytic_ou::stats::{mean_se, summarize};
use num_complex::Complex64;
use proptest::prelude::*;

fn ou(x0: f64) -> AffineModel {
    AffineModel::new(AffineKind::Ou, 0.5, 1.2, 0.7, x0).unwrap()
}

fn cir(b: f64, x0: f64) -> AffineModel {
    AffineModel::new(AffineKind::Cir, b, 1.0, 0.6, x0).unwrap()
}

#[test]
fn transform_at_zero_is_one() {
    let z = ou_transform(&ou(0.3), 2.0, Complex64::new(0.0, 0.0)).unwrap();
    assert!((z - 1.0).norm() < 1e-15);
    assert!((cir_transform(&cir(0.4, 1.0), 2.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn ou_characteristic_function_approaches_stationary_law() {
    // Stationary law N(b/β, σ²/β); |E e^{iuz}| = exp(-u²σ²/(2β)).
    let m = ou(3.0);
    let u = 1.3;
    let z = ou_transform(&m, 40.0, Complex64::new(0.0, u)).unwrap();
    let want = (-u * u * m.sigma * m.sigma / (2.0 * m.beta)).exp();
    assert!((z.norm() - want).abs() < 1e-12);
    assert!((z.arg() - u * m.b / m.beta).abs() < 1e-12);
}

#[test]
fn cir_without_drift_matches_riccati_closed_form() {
    // b = 0: φ ≡ 0 and ψ solves the logistic-type equation.
    let m = cir(0.0, 1.5);
    let (psi, phi) = cir_psi_phi(&m, 0.8, -2.0).unwrap();
    let (pc, fc) = cir_closed_form(&m, 0.8, -2.0);
    assert_eq!(phi, 0.0);
    assert_eq!(fc, 0.0);
    assert!((psi - pc).abs() < 1e-10);
    let e = (-0.8f64).exp();
    let want = -2.0 * e / (1.0 + 2.0 * 0.36 * (1.0 - e));
    assert!((pc - want).abs() < 1e-14);
}

#[test]
fn cir_rk45_matches_closed_form() {
    for &(b, x0, t, u) in &[(0.4, 1.0, 1.0, -0.5), (1.2, 0.0, 3.0, -4.0), (0.1, 2.0, 0.1, -10.0)] {
        let m = cir(b, x0);
        let (psi, phi) = cir_psi_phi(&m, t, u).unwrap();
        let (pc, fc) = cir_closed_form(&m, t, u);
        assert!((psi - pc).abs() < 1e-10 && (phi - fc).abs() < 1e-10);
    }
    assert!(cir_psi_phi(&cir(0.4, 1.0), 1.0, 0.5).is_err());
}

#[test]
fn small_noise_limit_is_the_mean_flow() {
    let m = AffineModel::new(AffineKind::Ou, 0.5, 1.2, 1e-6, 2.0).unwrap();
    let u = Complex64::new(0.7, 0.0);
    let z = ou_transform(&m, 1.5, u).unwrap();
    assert!((z.re.ln() - 0.7 * m.mean(1.5)).abs() < 1e-10);
}

#[test]
fn euler_maruyama_moments() {
    let t = 1.0;
    let m = ou(1.0);
    let ends = euler_maruyama(&m, 0.01, t, 20_000, 1).unwrap();
    let (mean, se) = mean_se(&ends);
    assert!(((mean - m.mean(t)) / se).abs() < 4.0);
    let var = summarize(&ends).unwrap().variance;
    let want = m.sigma * m.sigma / m.beta * (1.0 - (-2.0 * m.beta * t).exp());
    assert!((var / want - 1.0).abs() < 0.05, "{var} {want}");

    let c = cir(0.4, 0.5);
    let ends = euler_maruyama(&c, 0.01, t, 20_000, 2).unwrap();
    assert!(ends.iter().all(|&y| y >= 0.0));
    let (mean, se) = mean_se(&ends);
    assert!(((mean - c.mean(t)) / se).abs() < 4.0);
    assert_eq!(euler_maruyama(&c, 0.01, t, 5, 2).unwrap(), euler_maruyama(&c, 0.01, t, 5, 2).unwrap());
}

#[test]
fn invalid_models_are_rejected() {
    assert!(AffineModel::new(AffineKind::Cir, 0.4, 1.0, 0.6, -0.1).is_err());
    assert!(AffineModel::new(AffineKind::Ou, 0.4, 0.0, 0.6, 0.0).is_err());
    assert!(ou_transform(&cir(0.4, 1.0), 1.0, Complex64::new(0.0, 1.0)).is_err());
    assert!(cir_transform(&ou(1.0), 1.0, -1.0).is_err());
}

proptest! {
    #[test]
    fn ou_log_transform_is_affine_in_the_start(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, lam in 0.0f64..1.0, u in -2.0f64..2.0) {
        let t = 0.9;
        let u = Complex64::new(0.0, u);
        let log = |x: f64| { let (p, f) = ou_psi_phi(&ou(x), t, u); p * x + f };
        let mid = lam * x0 + (1.0 - lam) * x1;
        let lhs = log(mid);
        let rhs = log(x0) * lam + log(x1) * (1.0 - lam);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn ou_flow_property(s in 0.0f64..2.0, r in 0.0f64..2.0, ur in -2.0f64..2.0, ui in -2.0f64..2.0) {
        let m = ou(0.0);
        let u = Complex64::new(ur, ui);
        let (ps, fs) = ou_psi_phi(&m, s, u);
        let (pr, fr) = ou_psi_phi(&m, r, ps);
        let (pt, ft) = ou_psi_phi(&m, s + r, u);
        prop_assert!((pr - pt).norm() < 1e-12);
        prop_assert!((fs + fr - ft).norm() < 1e-12);
    }

    #[test]
    fn cir_flow_property(s in 0.0f64..2.0, r in 0.0f64..2.0, u in -5.0f64..0.0) {
        let m = cir(0.4, 0.0);
        let (ps, fs) = cir_psi_phi(&m, s, u).unwrap();
        let (pr, fr) = cir_psi_phi(&m, r, ps).unwrap();
        let (pt, ft) = cir_psi_phi(&m, s + r, u).unwrap();
        prop_assert!((pr - pt).abs() < 1e-9);
        prop_assert!((fs + fr - ft).abs() < 1e-9);
    }
}
