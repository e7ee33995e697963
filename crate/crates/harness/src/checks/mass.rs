use super::common::{grid_indices, sbm_options, snapshots};
use super::{Body, Ctx};
use crate::cells;
use crate::error::HarnessError;
use crate::mc::{mc_summary, variance_se};
use crate::plot::{Plot, Series};
use crate::report::{Row, Table};
use catalytic_ou::exec::try_map_replicas;
use catalytic_ou::rng;
use catalytic_ou::stats;
use catalytic_ou::superprocess::{BranchingScheme, ParticleMeasure};

/// Total masses at `times` for each replica (`out[r][k]`).
fn mass_samples(
    n_scale: usize,
    dt: f64,
    times: &[f64],
    scheme: BranchingScheme,
    cap: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let opts = sbm_options(n_scale, horizon, dt, cap, scheme);
    let steps = grid_indices(times, &opts)?;
    let initial = ParticleMeasure::point_mass(&[0.0], 1.0, n_scale);
    Ok(try_map_replicas(replicas, |r| {
        snapshots(&initial, &opts, &steps, rng::stream(seed, "mass", r as u64))
            .map(|states| states.iter().map(|s| s.total_mass()).collect::<Vec<f64>>())
    })?)
}

fn column(samples: &[Vec<f64>], k: usize) -> Vec<f64> {
    samples.iter().map(|row| row[k]).collect()
}

pub(crate) fn mass_martingale(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.mass_martingale;
    let cap = ctx.config.population_cap;
    let times: Vec<f64> = (1..=4).map(|i| p.horizon * i as f64 / 4.0).collect();
    let mut rows = Vec::new();
    let mut table = Table::new(&["scheme", "t", "mean_mass", "se"]);
    let mut series = Vec::new();
    for (label, scheme, n, dt, reps) in [
        ("exact", BranchingScheme::Exact, p.n_scale, p.dt, ctx.config.replicas_or(p.replicas)),
        ("bernoulli", BranchingScheme::Bernoulli, p.bernoulli_n_scale, p.bernoulli_dt, ctx.config.replicas_or(p.bernoulli_replicas)),
    ] {
        let samples = mass_samples(n, dt, &times, scheme, cap, reps, ctx.sub_seed(label))?;
        let mut pts = vec![(0.0, 1.0)];
        for (k, &t) in times.iter().enumerate() {
            let (m, se) = stats::mean_se(&column(&samples, k));
            rows.push(Row::z_test(format!("{label} scheme, E<1,Z_{t}> = 1"), 1.0, m, se));
            table.push(cells![label, t, m, se]);
            pts.push((t, m));
        }
        series.push(Series::line(label, pts));
    }
    series.push(Series::line("target", vec![(0.0, 1.0), (p.horizon, 1.0)]));
    let plot = Plot {
        title: "Mean total mass".into(),
        x_label: "t".into(),
        y_label: "E<1, Z_t>".into(),
        series,
        ..Plot::default()
    };
    Ok(Body { rows, notes: Vec::new(), table, plot: Some(plot) })
}

pub(crate) fn total_mass_laplace(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.total_mass;
    let replicas = ctx.config.replicas_or(p.replicas);
    let mut times = p.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let samples = mass_samples(p.n_scale, p.dt, &times, BranchingScheme::Exact, ctx.config.population_cap, replicas, ctx.sub_seed("mass"))?;
    let mut rows = Vec::new();
    let mut table = Table::new(&["t", "lambda", "analytic", "estimate", "se", "z"]);
    let mut series = Vec::new();
    for &lam in &p.lambdas {
        let mut pts = Vec::new();
        for (k, &t) in times.iter().enumerate() {
            let vals: Vec<f64> = column(&samples, k).iter().map(|m| (-lam * m).exp()).collect();
            let (m, se) = stats::mean_se(&vals);
            let target = (-lam / (1.0 + lam * t)).exp();
            let row = Row::z_test(format!("E exp(-{lam}<1,Z_{t}>)"), target, m, se);
            table.push(cells![t, lam, target, m, se, row.z.unwrap_or(f64::NAN)]);
            rows.push(row);
            pts.push((t, m));
        }
        series.push(Series::markers(&format!("λ = {lam}"), pts));
        let curve = (0..=40).map(|i| {
            let t = times[times.len() - 1] * i as f64 / 40.0;
            (t, (-lam / (1.0 + lam * t)).exp())
        });
        series.push(Series::line(&format!("exp(-λ/(1+λt)), λ = {lam}"), curve.collect()));
    }
    for (k, &t) in times.iter().enumerate() {
        let col = column(&samples, k);
        let s = mc_summary(&col, ctx.sub_seed("summary"))?;
        let var = s.variance;
        let se = variance_se(&col);
        let row = Row::z_test(format!("Var<1,Z_{t}> = 2t"), 2.0 * t, var, se);
        table.push(cells![t, "variance", 2.0 * t, var, se, row.z.unwrap_or(f64::NAN)]);
        rows.push(row);
    }
    let plot = Plot {
        title: "Laplace transform of the total mass".into(),
        x_label: "t".into(),
        y_label: "E exp(-λ<1,Z_t>)".into(),
        series,
        ..Plot::default()
    };
    let notes = vec![format!("N = {}, {} replicas, exact offspring law with dt = {}", p.n_scale, replicas, p.dt)];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}
