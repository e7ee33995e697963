use catalytic_ou::dual_pde::{solve_dual, DualProblem, Forcing, SolveOptions};
use catalytic_ou::gaussian_field::{quenched_covariance, sample_quenched_field};
use catalytic_ou::kernels::{GaussianBump, HeatKernelParams, PeriodicGrid};
use catalytic_ou::moments::{first_moment_density, fourth_moment_l2, second_moment_density, Initial, MomentQuery};
use catalytic_ou::rng;
use catalytic_ou::superprocess::{simulate_sbm, BranchingScheme, CatalystPath, ParticleMeasure, SbmOptions};
use catou_harness::checks::{self, names};
use catou_harness::plot::{emit_plot, Plot, Series};
use catou_harness::report::Table;
use catou_harness::{cells, ExperimentConfig, HarnessError};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "catou", version, about = "Catalytic Ornstein-Uhlenbeck laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Replica count override for every Monte Carlo stage.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate branching-particle catalyst paths.
    SimulateSbm,
    /// Solve the dual evolution equation from a Gaussian bump.
    SolveDual,
    /// Sample the quenched field at fixed points given one catalyst path.
    SampleField,
    /// Tabulate analytic moment formulas.
    Moments,
    /// Run one named check.
    Verify {
        /// Check name; `list` prints the registry.
        check: String,
    },
    /// Run every check.
    VerifyAll,
    /// Render two or more columns of a CSV file as an SVG line plot.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long, required = true, num_args = 1..)]
        y: Vec<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        config.seed = Some(s);
    }
    if let Some(r) = c.replicas {
        config.replicas = Some(r);
    }
    config.validate()?;
    Ok(config)
}

fn set_threads(n: Option<usize>) -> Result<(), HarnessError> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(HarnessError::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        eprintln!("note: built without the `parallel` feature; running on one thread");
    }
    Ok(())
}

fn simulate(config: &ExperimentConfig, out: &Path) -> Result<bool, HarnessError> {
    let p = &config.simulate;
    let seed = config.seed()?;
    let d = p.dimension;
    let initial = match p.initial.as_str() {
        "uniform" if d == 1 => ParticleMeasure::uniform_1d(0.0, 1.0, p.n_scale, p.initial_mass),
        "uniform" => {
            // Stratified in the first coordinate, golden-ratio sequence in the second.
            let count = (p.initial_mass * p.n_scale as f64).round() as usize;
            let pos = (0..count)
                .flat_map(|i| {
                    let u = (i as f64 + 0.5) / count as f64;
                    [u, (0.5 + i as f64 * 0.618_033_988_749_895).fract()]
                })
                .collect();
            ParticleMeasure::new(2, pos, 1.0 / p.n_scale as f64, 0.0)?
        }
        _ => ParticleMeasure::point_mass(&vec![0.0; d], p.initial_mass, p.n_scale),
    };
    let opts = SbmOptions {
        n_scale: p.n_scale,
        horizon: p.horizon,
        dt: p.dt,
        scheme: BranchingScheme::Exact,
        population_cap: config.population_cap,
    };
    let params = HeatKernelParams::gaussian(p.kappa, d);
    let replicas = config.replicas.unwrap_or(1);
    let paths = (0..replicas)
        .map(|r| simulate_sbm(&initial, &opts, &params, rng::child_seed(seed, "simulate-sbm", r as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    CatalystPath::export(&paths, out, "catalyst")?;
    let mut table = Table::new(&["replica", "time", "total_mass", "particles"]);
    for (r, path) in paths.iter().enumerate() {
        for st in &path.states {
            table.push(cells![r, st.time, st.total_mass(), st.count()]);
        }
    }
    table.write(&out.join("catalyst_mass.csv"))?;
    println!("wrote {} path(s) to {}", paths.len(), out.display());
    Ok(true)
}

fn dual(config: &ExperimentConfig, out: &Path) -> Result<bool, HarnessError> {
    let p = &config.dual;
    let grid = PeriodicGrid::padded(1, p.half_width, 1.0, p.t, p.grid_n)?;
    let bump = GaussianBump { center: 0.0, width: p.bump_width, weight: p.bump_weight };
    let forcing = if p.forcing > 0.0 { Forcing::Constant(p.forcing) } else { Forcing::Zero };
    let problem = DualProblem::new(
        grid.clone(),
        HeatKernelParams::gaussian(1.0, 1),
        grid.sample(|x| bump.value(x[0])),
        forcing,
        p.beta,
        0.0,
        p.t,
    )?;
    let sol = solve_dual(&problem, &SolveOptions::new(p.dt).recorded())?;
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    sol.export(out, "dual")?;
    let plot = Plot {
        title: "Dual solution".into(),
        x_label: "x".into(),
        y_label: "u".into(),
        series: vec![
            Series::line("u(0)", (0..grid.len()).map(|i| (grid.coord(i), sol.u[0][i])).collect()),
            Series::line(&format!("u({})", p.t), (0..grid.len()).map(|i| (grid.coord(i), sol.last()[i])).collect()),
        ],
        ..Plot::default()
    };
    emit_plot(&plot, &out.join("dual.svg"))?;
    println!("wrote dual solution ({} steps) to {}", sol.times.len() - 1, out.display());
    Ok(true)
}

fn field(config: &ExperimentConfig, out: &Path) -> Result<bool, HarnessError> {
    let p = &config.field;
    let seed = config.seed()?;
    let opts = SbmOptions {
        n_scale: p.n_scale,
        horizon: p.t,
        dt: p.dt,
        scheme: BranchingScheme::Exact,
        population_cap: config.population_cap,
    };
    let initial = ParticleMeasure::uniform_1d(0.0, 1.0, p.n_scale, 1.0);
    let path = simulate_sbm(&initial, &opts, &HeatKernelParams::gaussian(1.0, 1), rng::child_seed(seed, "catalyst", 0))?;
    let cov = quenched_covariance(&path, &p.points, p.t, p.kappa)?;
    let draws = sample_quenched_field(&cov, config.replicas.unwrap_or(p.replicas), rng::child_seed(seed, "field", 0))?;
    std::fs::create_dir_all(out)?;
    let header: Vec<String> = std::iter::once("replica".to_string()).chain(p.points.iter().map(|x| format!("x={x}"))).collect();
    let mut table = Table { header, rows: Vec::new() };
    for (r, v) in draws.iter().enumerate() {
        table.rows.push(std::iter::once(r.to_string()).chain(v.iter().map(|x| format!("{x}"))).collect());
    }
    table.write(&out.join("field.csv"))?;
    let mut ct = Table::new(&["i", "j", "x_i", "x_j", "covariance"]);
    for i in 0..p.points.len() {
        for j in 0..p.points.len() {
            ct.push(cells![i, j, p.points[i], p.points[j], cov.get(i, j)]);
        }
    }
    ct.write(&out.join("covariance.csv"))?;
    println!("wrote {} field draws to {}", draws.len(), out.display());
    Ok(true)
}

fn moments(config: &ExperimentConfig, out: &Path) -> Result<bool, HarnessError> {
    let p = &config.moments;
    std::fs::create_dir_all(out)?;
    let mut table = Table::new(&["t", "x", "first_moment_delta0", "second_moment_delta0", "second_moment_lebesgue", "fourth_moment_l2"]);
    for &t in &p.times {
        let fourth = fourth_moment_l2(t, 1.0)?.value;
        for &x in &p.xs {
            let f = first_moment_density(t, x, Initial::Delta0, 1.0)?;
            let sd = second_moment_density(&MomentQuery::new(t, t, x, x, Initial::Delta0))?.value;
            let sl = second_moment_density(&MomentQuery::new(t, t, x, x, Initial::Lebesgue))?.value;
            table.push(cells![t, x, f, sd, sl, fourth]);
        }
    }
    table.write(&out.join("moments.csv"))?;
    println!("wrote moment table to {}", out.join("moments.csv").display());
    Ok(true)
}

fn plot_csv(path: &Path, x: &str, ys: &[String], log_x: bool, log_y: bool, out: &Path) -> Result<bool, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Config(format!("column `{name}` not in {}", path.display())))
    };
    let xi = col(x)?;
    let yi = ys.iter().map(|y| col(y)).collect::<Result<Vec<_>, _>>()?;
    let mut series: Vec<Series> = ys.iter().map(|y| Series::line(y, Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec?;
        let Ok(xv) = rec[xi].parse::<f64>() else { continue };
        for (s, &i) in series.iter_mut().zip(&yi) {
            if let Ok(v) = rec[i].parse::<f64>() {
                s.points.push((xv, v));
            }
        }
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let plot = Plot { title: stem.into(), x_label: x.into(), y_label: ys.join(", "), log_x, log_y, series, annotation: None };
    std::fs::create_dir_all(out)?;
    let target = out.join(format!("{stem}.svg"));
    emit_plot(&plot, &target)?;
    println!("wrote {}", target.display());
    Ok(true)
}

fn print_report(r: &catou_harness::CheckReport) {
    for line in r.summary_lines() {
        println!("{line}");
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    set_threads(cli.common.threads)?;
    let out = cli.common.out.clone();
    if let Command::Verify { check } = &cli.command {
        if check == "list" {
            for c in checks::CHECKS {
                println!("{:<24} {}", c.name, c.claim);
            }
            return Ok(true);
        }
    }
    if let Command::Plot { csv, x, y, log_x, log_y } = &cli.command {
        return plot_csv(csv, x, y, *log_x, *log_y, &out);
    }
    let config = load_config(&cli.common)?;
    match &cli.command {
        Command::SimulateSbm => simulate(&config, &out),
        Command::SolveDual => dual(&config, &out),
        Command::SampleField => field(&config, &out),
        Command::Moments => moments(&config, &out),
        Command::Verify { check } => {
            checks::find(check)?;
            let report = checks::run_suite(&[check.as_str()], &config, &out, print_report)?;
            Ok(report.pass)
        }
        Command::VerifyAll => {
            let all = names();
            let report = checks::run_suite(&all, &config, &out, print_report)?;
            let passed = report.checks.iter().filter(|c| c.pass).count();
            println!("{passed}/{} checks passed", report.checks.len());
            Ok(report.pass)
        }
        Command::Plot { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
