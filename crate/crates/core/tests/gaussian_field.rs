use catalytic_ou::gaussian_field::{
    cholesky_psd, eigen_step_covariance, holder_estimate, quenched_covariance, quenched_pairing_variance,
    sample_eigen_paths, sample_quenched_field, sobolev_norm_of, EigenField,
};
use catalytic_ou::kernels::{dirichlet_eigensystem, heat_kernel, GaussianBump, HeatKernelParams};
use catalytic_ou::quad::{integrate, QuadOptions};
use catalytic_ou::superprocess::{CatalystPath, ParticleMeasure};
use proptest::prelude::*;
use std::f64::consts::PI;

fn times(t: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|i| i as f64 * t / m as f64).collect()
}

fn frozen_atom(x: f64, t: f64, m: usize) -> CatalystPath {
    CatalystPath::frozen(&ParticleMeasure::atom(&[x], 0.0), times(t, m)).unwrap()
}

#[test]
fn empty_catalyst_gives_a_zero_field() {
    let path = CatalystPath::frozen(&ParticleMeasure::empty(1, 0.0), times(1.0, 10)).unwrap();
    let cov = quenched_covariance(&path, &[0.0, 0.5], 1.0, 0.5).unwrap();
    assert!(cov.matrix.iter().all(|&v| v == 0.0));
    let draws = sample_quenched_field(&cov, 3, 1).unwrap();
    assert!(draws.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn frozen_atom_covariance_matches_quadrature() {
    let t = 0.8;
    let path = frozen_atom(0.0, t, 40);
    let pts = [0.3, -0.2, 0.7];
    let cov = quenched_covariance(&path, &pts, t, 0.5).unwrap();
    let k = HeatKernelParams::gaussian(0.5, 1);
    for i in 0..3 {
        for j in 0..3 {
            let q = integrate(
                |s| {
                    let tau = t - s;
                    if tau <= 0.0 {
                        return 0.0;
                    }
                    heat_kernel(tau, &[pts[i]], &[0.0], &k).unwrap() * heat_kernel(tau, &[pts[j]], &[0.0], &k).unwrap()
                },
                0.0,
                t,
                QuadOptions::with_tol(1e-12, 1e-10),
            )
            .unwrap()
            .value;
            assert!((cov.get(i, j) - q).abs() < 1e-8, "({i},{j}) {} vs {q}", cov.get(i, j));
        }
    }
    assert!(cov.is_psd());
}

#[test]
fn pairing_variance_on_a_frozen_atom() {
    let t = 1.0;
    let path = frozen_atom(0.2, t, 2000);
    let bump = GaussianBump { center: 0.0, width: 0.4, weight: 1.0 };
    let g = |tau: f64, z: &[f64]| bump.heat_convolve(tau, z[0], 0.5);
    let v = quenched_pairing_variance(&path, &g, t).unwrap();
    let q = integrate(|s| g(t - s, &[0.2]).powi(2), 0.0, t, QuadOptions::with_tol(1e-13, 1e-11)).unwrap().value;
    assert!((v - q).abs() < 1e-6 * q, "{v} {q}");
    assert!(quenched_pairing_variance(&path, &g, 1.5).is_err());
}

#[test]
fn two_point_field_has_the_requested_covariance() {
    let t = 0.5;
    let path = frozen_atom(0.0, t, 20);
    let cov = quenched_covariance(&path, &[0.1, 0.3], t, 0.5).unwrap();
    let draws = sample_quenched_field(&cov, 20_000, 5).unwrap();
    let n = draws.len() as f64;
    let c01 = draws.iter().map(|v| v[0] * v[1]).sum::<f64>() / n;
    let c00 = draws.iter().map(|v| v[0] * v[0]).sum::<f64>() / n;
    assert!((c00 / cov.get(0, 0) - 1.0).abs() < 0.05);
    assert!((c01 / cov.get(0, 1) - 1.0).abs() < 0.05);
}

#[test]
fn eigen_covariance_for_uniform_catalyst_is_diagonal() {
    let (t, h) = (0.2, 0.1);
    let path = CatalystPath::frozen(&ParticleMeasure::uniform_1d(0.0, 1.0, 4000, 1.0), times(0.3, 3)).unwrap();
    let eig = dirichlet_eigensystem(1, 0.5, 5).unwrap();
    let c = eigen_step_covariance(&path, &eig, t, h).unwrap();
    let k = eig.len();
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { -(-2.0 * eig.lambdas[i] * h).exp_m1() / (2.0 * eig.lambdas[i]) } else { 0.0 };
            assert!((c[i * k + j] - want).abs() < 1e-6, "({i},{j}) {} vs {want}", c[i * k + j]);
        }
    }
}

#[test]
fn eigen_covariance_for_a_frozen_midpoint_atom() {
    let (t, h) = (0.0, 0.25);
    let path = frozen_atom(0.5, 0.5, 4);
    let eig = dirichlet_eigensystem(1, 0.5, 4).unwrap();
    let c = eigen_step_covariance(&path, &eig, t, h).unwrap();
    let k = eig.len();
    for i in 0..k {
        for j in 0..k {
            let l = eig.lambdas[i] + eig.lambdas[j];
            let want = eig.phi(i, &[0.5]) * eig.phi(j, &[0.5]) * -(-l * h).exp_m1() / l;
            assert!((c[i * k + j] - want).abs() < 1e-10, "({i},{j})");
        }
    }
}

#[test]
fn sobolev_norm_of_the_first_mode() {
    let eig = dirichlet_eigensystem(1, 0.5, 6).unwrap();
    let mut c = vec![0.0; 6];
    c[0] = 1.0;
    let v = sobolev_norm_of(&c, &eig, 1.0, 1.0, 1.0).unwrap().value;
    assert!((v - (1.0 + PI * PI / 2.0).powf(-0.5)).abs() < 1e-12);
    assert!((v - 0.4104).abs() < 1e-4);
    assert!(sobolev_norm_of(&c, &eig, 0.5, 1.0, 1.0).is_err());
}

#[test]
fn zero_field_has_zero_norm() {
    let eig = dirichlet_eigensystem(1, 0.5, 6).unwrap();
    let f = EigenField::zero(times(1.0, 4), eig);
    assert_eq!(f.sobolev_norm(2, 1.0).unwrap().value, 0.0);
    assert_eq!(f.increment_norm(0, 4, 1.0), 0.0);
    assert_eq!(f.reconstruct(3, &[0.3]), 0.0);
}

#[test]
fn eigen_sampling_is_reproducible() {
    let path = CatalystPath::frozen(&ParticleMeasure::uniform_1d(0.0, 1.0, 50, 1.0), times(1.0, 20)).unwrap();
    let eig = dirichlet_eigensystem(1, 0.5, 8).unwrap();
    let ts = times(1.0, 10);
    let a = sample_eigen_paths(&path, &eig, &ts, 3, 11).unwrap();
    let b = sample_eigen_paths(&path, &eig, &ts, 3, 11).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].coeffs, a[1].coeffs);
    assert!(a[0].coeffs[0].iter().all(|&v| v == 0.0));
}

#[test]
fn eigen_sampling_matches_stationary_variance() {
    // Under a frozen uniform catalyst each coefficient is an OU process with
    // Var A_k(t) = (1 - e^{-2λ_k t}) / (2λ_k).
    let t = 1.0;
    let path = CatalystPath::frozen(&ParticleMeasure::uniform_1d(0.0, 1.0, 2000, 1.0), times(t, 10)).unwrap();
    let eig = dirichlet_eigensystem(1, 0.5, 3).unwrap();
    let fields = sample_eigen_paths(&path, &eig, &[0.0, t], 8000, 3).unwrap();
    for k in 0..3 {
        let var = fields.iter().map(|f| f.coeffs[1][k].powi(2)).sum::<f64>() / fields.len() as f64;
        let want = -(-2.0 * eig.lambdas[k] * t).exp_m1() / (2.0 * eig.lambdas[k]);
        assert!((var / want - 1.0).abs() < 0.06, "mode {k}: {var} vs {want}");
    }
}

#[test]
fn holder_slope_of_a_lipschitz_path() {
    let lags = [0.01, 0.02, 0.04, 0.08];
    let incs: Vec<Vec<f64>> = lags.iter().map(|&h| vec![h; 200]).collect();
    let est = holder_estimate(&lags, &incs, 1).unwrap();
    assert!((est.slope - 1.0).abs() < 0.01);
    assert!(holder_estimate(&lags[..3], &incs[..3], 1).is_err());
    let short: Vec<Vec<f64>> = lags.iter().map(|&h| vec![h; 10]).collect();
    assert!(holder_estimate(&lags, &short, 1).is_err());
}

#[test]
fn cholesky_reproduces_correlation() {
    let rho: f64 = 0.6;
    let (l, _) = cholesky_psd(&[1.0, rho, rho, 1.0], 2).unwrap();
    assert!((l[0] - 1.0).abs() < 1e-15);
    assert!((l[2] - rho).abs() < 1e-15);
    assert!((l[3] - (1.0 - rho * rho).sqrt()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn covariance_is_symmetric_psd(xs in prop::collection::vec(-1.0f64..1.0, 2..6), a in -0.5f64..0.5) {
        let path = frozen_atom(a, 0.5, 10);
        let pts: Vec<f64> = xs.iter().map(|x| x + 1e-3).collect();
        let cov = quenched_covariance(&path, &pts, 0.5, 0.5).unwrap();
        let n = pts.len();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((cov.get(i, j) - cov.get(j, i)).abs() <= 1e-14 * cov.get(i, i).max(1.0));
            }
        }
        prop_assert!(cov.is_psd());
    }

    #[test]
    fn sobolev_norm_decreases_with_order(c in prop::collection::vec(-2.0f64..2.0, 8), n in 0.6f64..3.0, dn in 0.0f64..2.0) {
        let eig = dirichlet_eigensystem(1, 0.5, 8).unwrap();
        let lo = sobolev_norm_of(&c, &eig, n, 1.0, 1.0).unwrap().value;
        let hi = sobolev_norm_of(&c, &eig, n + dn, 1.0, 1.0).unwrap().value;
        prop_assert!(hi <= lo + 1e-15);
    }
}
