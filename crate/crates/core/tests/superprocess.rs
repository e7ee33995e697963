use catalytic_ou::exec::map_replicas;
use catalytic_ou::kernels::HeatKernelParams;
use catalytic_ou::rng;
use catalytic_ou::stats::{mean_se, summarize};
use catalytic_ou::superprocess::{
    measure_pairing, occupation_integral, simulate_atom_catalyst, simulate_sbm, BranchingScheme, CatalystPath,
    FnForcing, ParticleMeasure, SbmOptions, SbmStepper,
};
use proptest::prelude::*;

fn unit() -> HeatKernelParams {
    HeatKernelParams::gaussian(1.0, 1)
}

fn end_masses(n: usize, t: f64, dt: f64, replicas: usize, scheme: BranchingScheme, seed: u64) -> Vec<f64> {
    let start = ParticleMeasure::point_mass(&[0.0], 1.0, n);
    let mut opts = SbmOptions::new(n, t, dt);
    opts.scheme = scheme;
    let (steps, _) = opts.grid();
    map_replicas(replicas, |r| {
        let mut s = SbmStepper::new(&start, &opts, &unit(), rng::stream(seed, "test-sbm", r as u64)).unwrap();
        for _ in 0..steps {
            s.step().unwrap();
        }
        s.state().total_mass()
    })
}

#[test]
fn simulation_is_deterministic_in_the_seed() {
    let start = ParticleMeasure::uniform_1d(-1.0, 1.0, 20, 1.0);
    let opts = SbmOptions::new(20, 0.5, 0.05);
    let a = simulate_sbm(&start, &opts, &unit(), 17).unwrap();
    let b = simulate_sbm(&start, &opts, &unit(), 17).unwrap();
    let c = simulate_sbm(&start, &opts, &unit(), 18).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.states, c.states);
    assert_eq!(a.times.len(), 11);
    assert!((a.horizon() - 0.5).abs() < 1e-15);
    assert!((a.states[0].total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn atom_catalyst_starts_at_origin_with_unit_mass() {
    let p = simulate_atom_catalyst(1.0, 0.1, 2, 4).unwrap();
    assert_eq!(p.states[0].point(0), &[0.0, 0.0]);
    assert!(p.total_masses().iter().all(|&m| m == 1.0));
    assert_eq!(p.times.len(), 11);
}

#[test]
fn step_grid_hits_the_horizon() {
    let (m, h) = SbmOptions::new(10, 1.0, 0.3).grid();
    assert_eq!(m, 4);
    assert!((h - 0.25).abs() < 1e-15);
    assert_eq!(SbmOptions::new(10, 1.0, 0.25).grid().0, 4);
}

#[test]
fn total_mass_is_a_martingale_with_linear_variance() {
    let t = 0.5;
    let masses = end_masses(40, t, 0.05, 4000, BranchingScheme::Exact, 7);
    let (m, se) = mean_se(&masses);
    assert!(((m - 1.0) / se).abs() < 4.0, "mean {m} se {se}");
    let s = summarize(&masses).unwrap();
    // Var <1, Z_t> = 2t up to an O(1/N) correction absent for the exact law.
    assert!((s.variance - 2.0 * t).abs() < 0.1, "{}", s.variance);
}

#[test]
fn total_mass_laplace_transform() {
    let t = 0.5;
    let lam = 1.0;
    let masses = end_masses(40, t, 0.05, 4000, BranchingScheme::Exact, 8);
    let vals: Vec<f64> = masses.iter().map(|m| (-lam * m).exp()).collect();
    let (est, se) = mean_se(&vals);
    let target = (-lam / (1.0 + lam * t)).exp();
    assert!(((est - target) / se).abs() < 4.0, "{est} vs {target}");
}

#[test]
fn bernoulli_scheme_is_unbiased_in_mean() {
    let masses = end_masses(20, 0.3, 0.005, 3000, BranchingScheme::Bernoulli, 9);
    let (m, se) = mean_se(&masses);
    assert!(((m - 1.0) / se).abs() < 4.0, "{m} {se}");
}

#[test]
fn occupation_of_a_frozen_delta_is_the_horizon() {
    let m = ParticleMeasure::point_mass(&[0.4], 1.0, 5);
    let times: Vec<f64> = (0..=7).map(|i| i as f64 / 7.0 * 2.0).collect();
    let p = CatalystPath::frozen(&m, times).unwrap();
    let v = occupation_integral(&p, &FnForcing(|_s: f64, _x: &[f64]| 1.0));
    assert!((v - 2.0).abs() < 1e-12);
    let lin = occupation_integral(&p, &FnForcing(|s: f64, _x: &[f64]| s));
    assert!((lin - 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn pairing_with_an_indicator_counts_particles(
        xs in prop::collection::vec(-5.0f64..5.0, 0..60),
        lo in -5.0f64..0.0,
        width in 0.0f64..5.0,
        n in 1usize..50,
    ) {
        let hi = lo + width;
        let m = ParticleMeasure::new(1, xs.clone(), 1.0 / n as f64, 0.0).unwrap();
        let got = measure_pairing(&m, &|x: &[f64]| if x[0] >= lo && x[0] < hi { 1.0 } else { 0.0 });
        let count = xs.iter().filter(|&&x| x >= lo && x < hi).count();
        prop_assert!((got - count as f64 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn pairing_is_linear(xs in prop::collection::vec(-5.0f64..5.0, 1..40), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let m = ParticleMeasure::new(1, xs, 0.1, 0.0).unwrap();
        let f = |x: &[f64]| x[0].sin();
        let g = |x: &[f64]| x[0] * x[0];
        let lhs = measure_pairing(&m, &|x: &[f64]| a * f(x) + b * g(x));
        let rhs = a * measure_pairing(&m, &f) + b * measure_pairing(&m, &g);
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }
}
