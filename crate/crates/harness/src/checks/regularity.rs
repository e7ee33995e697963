use super::common::{catalyst_kernel, sbm_options};
use super::{Body, Ctx};
use crate::cells;
use crate::error::{invalid, HarnessError};
use crate::plot::{Plot, Series};
use crate::report::{Row, Table};
use catalytic_ou::gaussian_field::{holder_estimate, sample_eigen_paths, HolderEstimate};
use catalytic_ou::kernels::dirichlet_eigensystem;
use catalytic_ou::rng;
use catalytic_ou::superprocess::{simulate_sbm, BranchingScheme, ParticleMeasure};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Increments of a scalar path at lags `1, 2, 4, ...` grid steps, taken at
/// non-overlapping starts.
fn scalar_increments(path: &[f64], levels: usize, starts: usize) -> Vec<Vec<f64>> {
    let lmax = 1 << (levels - 1);
    (0..levels)
        .map(|l| (0..starts).map(|j| (path[j * lmax + (1 << l)] - path[j * lmax]).abs()).collect())
        .collect()
}

fn calibration(label: &str, est: &HolderEstimate, target: f64, tol: f64) -> Row {
    Row::within(format!("calibration, {label}: exponent {target}"), target, est.slope, tol)
}

pub(crate) fn quenched_holder(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.holder;
    let replicas = ctx.config.replicas_or(p.replicas);
    let m = p.time_points;
    let dt = p.horizon / m as f64;
    let lmax = 1usize << (p.lag_levels - 1);
    let starts = (m / 2) / lmax;
    if starts == 0 {
        return invalid("holder.time_points too small for the requested lag levels");
    }
    let opts = sbm_options(p.n_scale, p.horizon, dt, ctx.config.population_cap, BranchingScheme::Exact);
    let initial = ParticleMeasure::uniform_1d(0.0, 1.0, p.n_scale, 1.0);
    let path = simulate_sbm(&initial, &opts, &catalyst_kernel(), ctx.sub_seed("catalyst"))?;
    let eig = dirichlet_eigensystem(1, p.kappa, p.modes)?;
    let times: Vec<f64> = (0..=m).map(|i| i as f64 * dt).collect();
    let fields = sample_eigen_paths(&path, &eig, &times, replicas, ctx.sub_seed("field"))?;
    let first = m / 2;
    let lags: Vec<f64> = (0..p.lag_levels).map(|l| (1 << l) as f64 * dt).collect();
    let increments: Vec<Vec<f64>> = (0..p.lag_levels)
        .map(|l| {
            fields
                .iter()
                .flat_map(|f| (0..starts).map(move |j| (f, first + j * lmax)))
                .filter(|&(_, i)| i + (1 << l) <= m)
                .map(|(f, i)| f.increment_norm(i, i + (1 << l), p.sobolev_order))
                .collect()
        })
        .collect();
    let est = holder_estimate(&lags, &increments, ctx.sub_seed("bootstrap"))?;
    let mut rows = vec![Row::inside(
        format!("Hölder exponent in H_-{} over {} dyadic lags", p.sobolev_order, p.lag_levels),
        est.slope,
        p.band[0],
        p.band[1],
        false,
    )];

    // Calibration: a smooth path and a Brownian path through the same estimator.
    let n = p.calibration_samples;
    let steps = n * lmax + 1;
    let cal_dt = 1.0 / (4 * steps) as f64;
    let smooth: Vec<f64> = (0..steps).map(|i| {
        let t = i as f64 * cal_dt;
        (2.0 * PI * t).sin() + t
    }).collect();
    let mut g = rng::stream(ctx.sub_seed("calibration"), "brownian", 0);
    let mut bm = Vec::with_capacity(steps);
    let mut w = 0.0;
    for _ in 0..steps {
        bm.push(w);
        let z: f64 = g.sample(StandardNormal);
        w += cal_dt.sqrt() * z;
    }
    let cal_lags: Vec<f64> = (0..p.lag_levels).map(|l| (1 << l) as f64 * cal_dt).collect();
    let lip = holder_estimate(&cal_lags, &scalar_increments(&smooth, p.lag_levels, n), ctx.sub_seed("calibration-lip"))?;
    let bro = holder_estimate(&cal_lags, &scalar_increments(&bm, p.lag_levels, n), ctx.sub_seed("calibration-bm"))?;
    rows.push(calibration("Lipschitz path", &lip, 1.0, p.calibration_tol));
    rows.push(calibration("Brownian path", &bro, 0.5, p.calibration_tol));

    let mut table = Table::new(&["lag", "mean_increment_norm", "samples", "lipschitz_mean", "brownian_mean"]);
    for l in 0..p.lag_levels {
        table.push(cells![lags[l], est.mean_norms[l], increments[l].len(), lip.mean_norms[l], bro.mean_norms[l]]);
    }
    let c = est.mean_norms[0] / lags[0].sqrt();
    let plot = Plot {
        title: "Quenched field increments in H_-1".into(),
        x_label: "lag h".into(),
        y_label: "E||X(t+h) - X(t)||".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series::line("field", lags.iter().copied().zip(est.mean_norms.iter().copied()).collect()),
            Series::line("c h^(1/2)", lags.iter().map(|&h| (h, c * h.sqrt())).collect()),
        ],
        annotation: Some(format!("slope {:.3}, 95% CI [{:.3}, {:.3}]", est.slope, est.ci95.lo, est.ci95.hi)),
    };
    let notes = vec![
        format!(
            "one catalyst path (N = {}, uniform start on [0, 1]), {} field replicas, {} modes, generator {}Δ, t-grid step {}",
            p.n_scale, replicas, p.modes, p.kappa, dt
        ),
        format!("bootstrap 95% CI of the exponent [{:.4}, {:.4}]", est.ci95.lo, est.ci95.hi),
        format!("calibration slopes: Lipschitz {:.4}, Brownian {:.4}", lip.slope, bro.slope),
    ];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}
