use super::{Body, Ctx};
use crate::cells;
use crate::error::HarnessError;
use crate::mc::mc_summary;
use crate::plot::{Plot, Series};
use crate::report::{Row, Table};
use catalytic_ou::exec::try_map_replicas;
use catalytic_ou::gaussian_field::quenched_covariance;
use catalytic_ou::moments::annealed_atom_variance;
use catalytic_ou::rng;
use catalytic_ou::superprocess::simulate_atom_catalyst;

/// Field generator `½Δ`, matching the standard Brownian atom.
const FIELD_KAPPA: f64 = 0.5;

pub(crate) fn atom_variance(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.atom_variance;
    let replicas = ctx.config.replicas_or(p.replicas);
    let path_seed = ctx.sub_seed("atom-paths");
    let samples = try_map_replicas(replicas, |r| -> catalytic_ou::Result<f64> {
        let path = simulate_atom_catalyst(p.t, p.dt, 1, rng::child_seed(path_seed, "replica", r as u64))?;
        Ok(quenched_covariance(&path, &[p.x], p.t, FIELD_KAPPA)?.get(0, 0))
    })?;
    let target = annealed_atom_variance(p.t, &[p.x])?.value();
    let s = mc_summary(&samples, ctx.sub_seed("bootstrap"))?;
    let rows = vec![
        Row::z_test("annealed variance, z-test", target, s.mean, s.se),
        Row::within("annealed variance, absolute error", target, s.mean, p.abs_tol),
    ];
    let mut table = Table::new(&["replica", "quenched_variance"]);
    for (r, v) in samples.iter().enumerate() {
        table.push(cells![r, *v]);
    }
    // Running mean at powers of two.
    let mut pts = Vec::new();
    let mut acc = 0.0;
    for (i, v) in samples.iter().enumerate() {
        acc += v;
        if (i + 1).is_power_of_two() || i + 1 == samples.len() {
            pts.push(((i + 1) as f64, acc / (i + 1) as f64));
        }
    }
    let plot = Plot {
        title: "Annealed atom variance".into(),
        x_label: "replicas".into(),
        y_label: "running mean".into(),
        log_x: true,
        series: vec![Series::line("estimate", pts), Series::line("target", vec![(1.0, target), (samples.len().max(2) as f64, target)])],
        annotation: Some(format!("mean {:.5} ± {:.5}", s.mean, s.se)),
        ..Plot::default()
    };
    let notes = vec![format!(
        "{} paths, dt = {}, quenched variances by exact time integrals of the kernel product; bootstrap CI [{:.5}, {:.5}]",
        replicas, p.dt, s.bootstrap_ci95.lo, s.bootstrap_ci95.hi
    )];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}
