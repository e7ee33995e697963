use super::common::{grid_indices, point_start_path, sbm_options, snapshots};
use super::{Body, Ctx};
use crate::cells;
use crate::error::HarnessError;
use crate::plot::{Plot, Series};
use crate::report::{Row, Table};
use catalytic_ou::exec::try_map_replicas;
use catalytic_ou::gaussian_field::{quenched_pairing_variance, L2FieldSampler};
use catalytic_ou::kernels::{gauss, GaussianBump, PeriodicGrid};
use catalytic_ou::moments::{
    first_moment_density, fourth_moment_l2, leptokurtosis_certificate, particle_pair_moment, second_moment_density,
    Initial, MomentQuery,
};
use catalytic_ou::rng;
use catalytic_ou::stats;
use catalytic_ou::superprocess::{measure_pairing, BranchingScheme, ParticleMeasure};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// `⟨p(h², x, ·), μ⟩` for the catalyst kernel (`κ = 1`).
fn smoothed_density(state: &ParticleMeasure, x: f64, h2: f64) -> f64 {
    measure_pairing(state, &|u: &[f64]| gauss(h2, (u[0] - x).powi(2), 1.0, 1))
}

pub(crate) fn first_moment(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.first_moment;
    let replicas = ctx.config.replicas_or(p.replicas);
    let mut times = p.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let horizon = times[times.len() - 1];
    let opts = sbm_options(p.n_scale, horizon, p.dt, ctx.config.population_cap, BranchingScheme::Exact);
    let steps = grid_indices(&times, &opts)?;
    let initial = ParticleMeasure::point_mass(&[0.0], 1.0, p.n_scale);
    let seed = ctx.sub_seed("paths");
    let samples = try_map_replicas(replicas, |r| {
        snapshots(&initial, &opts, &steps, rng::stream(seed, "replica", r as u64)).map(|states| {
            states
                .iter()
                .flat_map(|st| p.xs.iter().map(move |&x| smoothed_density(st, x, p.smoothing)))
                .collect::<Vec<f64>>()
        })
    })?;
    let mut rows = Vec::new();
    let mut table = Table::new(&["t", "x", "analytic", "estimate", "se", "z"]);
    let mut series = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let mut est = Vec::new();
        for (j, &x) in p.xs.iter().enumerate() {
            let col: Vec<f64> = samples.iter().map(|s| s[k * p.xs.len() + j]).collect();
            let (m, se) = stats::mean_se(&col);
            // Smoothing by p(h², x, ·) adds h² to the time of the density.
            let target = first_moment_density(t + p.smoothing, x, Initial::Delta0, 1.0)?;
            let row = Row::z_test(format!("E Z_{t}(dx) at x = {x}"), target, m, se);
            table.push(cells![t, x, target, m, se, row.z.unwrap_or(f64::NAN)]);
            rows.push(row);
            est.push((x, m));
        }
        series.push(Series::markers(&format!("particles, t = {t}"), est));
        let lo = p.xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let curve = (0..=40)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / 40.0;
                (x, first_moment_density(t + p.smoothing, x, Initial::Delta0, 1.0).unwrap_or(f64::NAN))
            })
            .collect();
        series.push(Series::line(&format!("p(t + h², 0, x), t = {t}"), curve));
    }
    let plot = Plot {
        title: "First moment density".into(),
        x_label: "x".into(),
        y_label: "density".into(),
        series,
        ..Plot::default()
    };
    Ok(Body { rows, notes: vec![format!("smoothing variance parameter h² = {}", p.smoothing)], table, plot: Some(plot) })
}

pub(crate) fn second_moment(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.second_moment;
    let replicas = ctx.config.replicas_or(p.replicas);
    let mut times: Vec<f64> = p.time_pairs.iter().flatten().copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let horizon = times[times.len() - 1];
    let opts = sbm_options(p.n_scale, horizon, p.dt, ctx.config.population_cap, BranchingScheme::Exact);
    let steps = grid_indices(&times, &opts)?;
    let initial = ParticleMeasure::point_mass(&[0.0], 1.0, p.n_scale);
    let seed = ctx.sub_seed("paths");
    let idx = |t: f64| times.iter().position(|&s| s == t).expect("time was collected above");
    let combos: Vec<(usize, usize, f64, f64)> = p
        .time_pairs
        .iter()
        .flat_map(|tp| p.x_pairs.iter().map(move |xp| (tp, xp)))
        .map(|(tp, xp)| (idx(tp[0]), idx(tp[1]), xp[0], xp[1]))
        .collect();
    let samples = try_map_replicas(replicas, |r| {
        snapshots(&initial, &opts, &steps, rng::stream(seed, "replica", r as u64)).map(|states| {
            combos
                .iter()
                .map(|&(i, j, x1, x2)| smoothed_density(&states[i], x1, p.smoothing) * smoothed_density(&states[j], x2, p.smoothing))
                .collect::<Vec<f64>>()
        })
    })?;
    let mut rows = Vec::new();
    let mut table = Table::new(&["t1", "t2", "x1", "x2", "particle_analytic", "sbm_analytic", "estimate", "se", "z"]);
    let mut pts_est = Vec::new();
    let mut pts_ana = Vec::new();
    for (c, &(i, j, x1, x2)) in combos.iter().enumerate() {
        let (t1, t2) = (times[i], times[j]);
        let col: Vec<f64> = samples.iter().map(|s| s[c]).collect();
        let (m, se) = stats::mean_se(&col);
        let q = MomentQuery::new(t1, t2, x1, x2, Initial::Delta0);
        let target = particle_pair_moment(&q, p.smoothing, p.n_scale)?.value;
        // N → ∞ value, for reference.
        let sbm = particle_pair_moment(&q, p.smoothing, usize::MAX)?.value;
        let row = Row::z_test(format!("E[Z_{t1}(dx1) Z_{t2}(dx2)] at ({x1}, {x2})"), target, m, se);
        table.push(cells![t1, t2, x1, x2, target, sbm, m, se, row.z.unwrap_or(f64::NAN)]);
        rows.push(row);
        pts_est.push(((c + 1) as f64, m));
        pts_ana.push(((c + 1) as f64, target));
    }
    let leb = second_moment_density(&MomentQuery::new(1.0, 1.0, 0.0, 0.0, Initial::Lebesgue))?;
    let diag = (2.0 * PI).powf(-0.5);
    rows.push(Row::within("Lebesgue start, t1 = t2 = 1, x1 = x2 = 0: value (2π)^(-1/2)", diag, leb.value, p.diagonal_tol));
    table.push(cells![1.0, 1.0, 0.0, 0.0, "", leb.value, "", "", ""]);
    let plot = Plot {
        title: "Second moment densities".into(),
        x_label: "query".into(),
        y_label: "E[Z Z]".into(),
        series: vec![Series::markers("particles", pts_est), Series::markers("analytic", pts_ana)],
        ..Plot::default()
    };
    let notes = vec![format!(
        "δ0 start with N = {} particles of mass 1/N; the analytic value includes the exact finite-N terms, the N → ∞ value is tabulated",
        p.n_scale
    )];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}

pub(crate) fn fourth_moment_growth(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.fourth_moment;
    let replicas = ctx.config.replicas_or(p.replicas);
    let kappa = 1.0;
    let grid = PeriodicGrid::new(1, -p.half_width, p.half_width, p.grid_n)?;
    let sampler = L2FieldSampler::new(grid, kappa)?;
    let opts = sbm_options(p.n_scale, p.t, p.dt, ctx.config.population_cap, BranchingScheme::Exact);
    let seed = ctx.sub_seed("paths");
    let norms = try_map_replicas(replicas, |r| -> catalytic_ou::Result<f64> {
        let path = point_start_path(&opts, rng::child_seed(seed, "catalyst", r as u64))?;
        let mut g = rng::stream(seed, "field", r as u64);
        sampler.sample_norm_sq(&path, p.t, &mut g)
    })?;
    let fourth: Vec<f64> = norms.iter().map(|v| v * v).collect();
    let (m, se) = stats::mean_se(&fourth);
    let fm = fourth_moment_l2(p.t, kappa)?;
    let target = fm.particle_value(p.n_scale);
    let mut rows = vec![Row::z_test(format!("E||X_{}||⁴, sampled vs quadrature", p.t), target, m, se)];
    let (m2, se2) = stats::mean_se(&norms);
    let c2 = 1.0 / (8.0 * PI * kappa);
    rows.push(Row::z_test(
        format!("E||X_{}||², sampled vs 2C√t", p.t),
        fm.c_const * 2.0 * p.t.sqrt(),
        m2,
        se2,
    ));
    rows.push(Row::within(
        "squared-mean term vs C²(4t + 4t²)",
        c2 * (4.0 * p.t + 4.0 * p.t * p.t),
        fm.squared_mean_term,
        1e-8,
    ));
    let mut table = Table::new(&["t", "analytic", "particle_analytic", "squared_mean_term", "trace_term", "estimate", "se"]);
    let mut ts = p.slope_times.clone();
    ts.sort_by(f64::total_cmp);
    let mut vals = Vec::new();
    for &t in &ts {
        let f = fourth_moment_l2(t, kappa)?;
        vals.push(f.value);
        let (e, s) = if t == p.t { (format!("{m}"), format!("{se}")) } else { (String::new(), String::new()) };
        table.push(cells![t, f.value, f.particle_value(p.n_scale), f.squared_mean_term, f.trace_term, e, s]);
    }
    let fit = stats::loglog_fit(&ts, &vals);
    rows.push(Row::at_most("log-log slope of E||X_t||⁴ over t", fit.slope, p.slope_limit));
    let ref_c = vals[vals.len() - 1] / ts[ts.len() - 1].powi(2);
    let plot = Plot {
        title: "Fourth moment of the L² norm".into(),
        x_label: "t".into(),
        y_label: "E||X_t||⁴".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series::line("quadrature", ts.iter().copied().zip(vals.iter().copied()).collect()),
            Series::markers("sampled", vec![(p.t, m)]),
            Series::line("C t²", ts.iter().map(|&t| (t, ref_c * t * t)).collect()),
        ],
        annotation: Some(format!("fitted slope {:.3}", fit.slope)),
    };
    let notes = vec![format!(
        "catalyst: N = {} particles from δ0, dt = {}; the quadrature target includes the exact finite-N trace correction ({:.3e}); N → ∞ value {:.6}",
        p.n_scale,
        p.dt,
        target - fm.value,
        fm.value
    )];
    Ok(Body { rows, notes, table, plot: Some(plot) })
}

pub(crate) fn leptokurtosis(ctx: &Ctx) -> Result<Body, HarnessError> {
    let p = &ctx.config.checks.kurtosis;
    let replicas = ctx.config.replicas_or(p.replicas);
    let bump = GaussianBump { center: 0.0, width: p.bump_width, weight: 1.0 };
    let field_kappa = 0.5;
    let opts = sbm_options(p.n_scale, p.t, p.dt, ctx.config.population_cap, BranchingScheme::Exact);
    let seed = ctx.sub_seed("paths");
    let g = |tau: f64, z: &[f64]| bump.heat_convolve(tau, z[0], field_kappa);
    let pairs = try_map_replicas(replicas, |r| -> catalytic_ou::Result<(f64, f64)> {
        let path = point_start_path(&opts, rng::child_seed(seed, "catalyst", r as u64))?;
        let v = quenched_pairing_variance(&path, &g, p.t)?;
        let xi: f64 = rng::stream(seed, "field", r as u64).sample(StandardNormal);
        Ok((v, v.sqrt() * xi))
    })?;
    let samples: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let variances: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let cert = leptokurtosis_certificate(&samples, ctx.sub_seed("bootstrap"))?;
    let mut g_rng = rng::stream(ctx.sub_seed("calibration"), "gauss", 0);
    let gauss_samples: Vec<f64> = (0..replicas).map(|_| g_rng.sample(StandardNormal)).collect();
    let calib = leptokurtosis_certificate(&gauss_samples, ctx.sub_seed("calibration-bootstrap"))?;
    // Conditionally Gaussian: excess kurtosis is 3 Var(V) / E[V]².
    let (mv, _) = stats::mean_se(&variances);
    let vv = variances.iter().map(|v| (v - mv).powi(2)).sum::<f64>() / (variances.len() as f64 - 1.0);
    let mixture = 3.0 * vv / (mv * mv);
    let rows = vec![
        Row::interval_above("annealed <φ,X_t>: 95% bootstrap CI of excess kurtosis above 0", cert.excess_kurtosis, cert.ci95.lo, cert.ci95.hi, 0.0),
        Row::interval_contains("Gaussian calibration: CI contains 0", calib.excess_kurtosis, calib.ci95.lo, calib.ci95.hi, 0.0),
    ];
    let mut table = Table::new(&["sample", "annealed", "quenched_variance", "gaussian"]);
    for (i, ((x, v), gs)) in samples.iter().zip(&variances).zip(&gauss_samples).enumerate() {
        table.push(cells![i, *x, *v, *gs]);
    }
    let notes = vec![
        format!("excess kurtosis {:.4} (CI [{:.4}, {:.4}]) from {} samples", cert.excess_kurtosis, cert.ci95.lo, cert.ci95.hi, cert.n),
        format!("variance-mixture prediction from the sampled quenched variances: {mixture:.4}"),
        format!("fraction of extinct catalysts (zero variance): {:.4}", variances.iter().filter(|&&v| v == 0.0).count() as f64 / variances.len() as f64),
    ];
    Ok(Body { rows, notes, table, plot: None })
}
