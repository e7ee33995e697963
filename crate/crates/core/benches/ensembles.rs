//! Replica ensembles through the parallel fan-out and the sequential path.
//! With the `parallel` feature off both run sequentially.

use catalytic_ou::exec::{map_replicas, map_replicas_seq};
use catalytic_ou::gaussian_field::quenched_covariance;
use catalytic_ou::kernels::HeatKernelParams;
use catalytic_ou::rng;
use catalytic_ou::superprocess::{simulate_atom_catalyst, simulate_sbm, ParticleMeasure, SbmOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn sbm_mass(r: usize) -> f64 {
    let opts = SbmOptions::new(100, 0.5, 0.05);
    let init = ParticleMeasure::point_mass(&[0.0], 1.0, 100);
    let path = simulate_sbm(&init, &opts, &HeatKernelParams::gaussian(1.0, 1), rng::child_seed(7, "bench", r as u64)).unwrap();
    path.states.last().unwrap().total_mass()
}

fn atom_variance(r: usize) -> f64 {
    let path = simulate_atom_catalyst(1.0, 1e-3, 1, rng::child_seed(7, "bench-atom", r as u64)).unwrap();
    quenched_covariance(&path, &[0.0], 1.0, 0.5).unwrap().get(0, 0)
}

fn ensembles(c: &mut Criterion) {
    let mut g = c.benchmark_group("sbm-ensemble");
    g.sample_size(10);
    for n in [64usize, 256] {
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| b.iter(|| black_box(map_replicas(n, sbm_mass))));
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| b.iter(|| black_box(map_replicas_seq(n, sbm_mass))));
    }
    g.finish();

    let mut g = c.benchmark_group("atom-variance-ensemble");
    g.sample_size(10);
    let n = 64;
    g.bench_function("parallel", |b| b.iter(|| black_box(map_replicas(n, atom_variance))));
    g.bench_function("sequential", |b| b.iter(|| black_box(map_replicas_seq(n, atom_variance))));
    g.finish();
}

criterion_group!(benches, ensembles);
criterion_main!(benches);
