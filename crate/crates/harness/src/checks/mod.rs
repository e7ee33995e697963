//! Registry of named verification checks.
//!
//! Each check derives its own seed from the root seed and its name, so a
//! check produces the same numbers whether it runs alone or inside
//! `verify-all`, and whatever the worker-thread count.

mod affine;
mod atom;
mod common;
mod duality;
mod mass;
mod moment;
mod regularity;
mod solver;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::plot::{emit_plot, Plot};
use crate::report::{CheckOutcome, CheckReport, Report, Row, Table};
use catalytic_ou::rng;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

/// What a check body returns.
pub(crate) struct Body {
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
    pub table: Table,
    pub plot: Option<Plot>,
}

pub(crate) struct Ctx<'a> {
    pub config: &'a ExperimentConfig,
    /// Seed private to this check.
    pub seed: u64,
}

impl Ctx<'_> {
    /// Seed for one named purpose inside the check.
    pub fn sub_seed(&self, purpose: &str) -> u64 {
        rng::child_seed(self.seed, purpose, 0)
    }
}

pub struct CheckSpec {
    pub name: &'static str,
    pub claim: &'static str,
    run: fn(&Ctx) -> Result<Body, HarnessError>,
}

pub const CHECKS: &[CheckSpec] = &[
    CheckSpec {
        name: "atom-variance-quarter",
        claim: "Under a single Brownian atom catalyst in d = 1 the annealed variance of X_1(0) equals 1/4.",
        run: atom::atom_variance,
    },
    CheckSpec {
        name: "sbm-mass-martingale",
        claim: "The total mass of the branching particle catalyst is a martingale under both branching schemes.",
        run: mass::mass_martingale,
    },
    CheckSpec {
        name: "sbm-total-mass-laplace",
        claim: "E exp(-λ<1,Z_t>) = exp(-λ/(1+λt)) and Var<1,Z_t> = 2t for a unit initial mass.",
        run: mass::total_mass_laplace,
    },
    CheckSpec {
        name: "first-moment",
        claim: "The first moment measure of the catalyst started from δ0 has density p(t, 0, x).",
        run: moment::first_moment,
    },
    CheckSpec {
        name: "second-moment",
        claim: "Second moment densities from the genealogical formula match kernel-smoothed particle averages.",
        run: moment::second_moment,
    },
    CheckSpec {
        name: "occupation-laplace",
        claim: "E exp(-<ψ,Z_t> - ∫<Φ(s),Z_s>ds) = exp(-<u(t),μ>) for the inhomogeneous dual propagator, including step-in-time Φ.",
        run: duality::occupation_laplace,
    },
    CheckSpec {
        name: "char-laplace",
        claim: "E exp(i<φ,X_t> - λ<1,Z_t>) = exp(-<u(t),μ>) with dual forcing ½ G_φ².",
        run: duality::char_laplace,
    },
    CheckSpec {
        name: "fourth-moment-growth",
        claim: "E||X_t||⁴ from nested quadrature matches end-to-end sampling and grows at most like t².",
        run: moment::fourth_moment_growth,
    },
    CheckSpec {
        name: "quenched-holder",
        claim: "Given the catalyst, t -> X(t) in H_{-1} is Hölder continuous with exponent close to 1/2.",
        run: regularity::quenched_holder,
    },
    CheckSpec {
        name: "leptokurtosis",
        claim: "Annealed one-dimensional marginals <φ,X_t> have strictly positive excess kurtosis.",
        run: moment::leptokurtosis,
    },
    CheckSpec {
        name: "dual-convergence",
        claim: "The dual solver is second order in dt and agrees with an independent Picard/Volterra iteration.",
        run: solver::dual_convergence,
    },
    CheckSpec {
        name: "propagator-compose",
        claim: "Dual propagators compose, U(t,r)U(r,s) = U(t,s); heat kernels satisfy Chapman-Kolmogorov; eigenmodes are orthonormal.",
        run: solver::propagator_compose,
    },
    CheckSpec {
        name: "affine-ou",
        claim: "The OU transform is exponential-affine in the initial state with ψ/φ satisfying the flow property.",
        run: affine::affine_ou,
    },
    CheckSpec {
        name: "affine-cir",
        claim: "The CIR transform is exponential-affine in the initial state; the measure-valued log-Laplace functional is linear in μ.",
        run: affine::affine_cir,
    },
];

pub fn names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

pub fn find(name: &str) -> Result<&'static CheckSpec, HarnessError> {
    CHECKS.iter().find(|c| c.name == name).ok_or_else(|| HarnessError::UnknownCheck(name.into()))
}

/// Runs one named check. Unknown names and invalid configs are errors;
/// failures inside the check (including resource caps) also propagate.
pub fn run_check(name: &str, config: &ExperimentConfig) -> Result<CheckOutcome, HarnessError> {
    let spec = find(name)?;
    config.validate()?;
    let ctx = Ctx { config, seed: rng::child_seed(config.seed()?, spec.name, 0) };
    let body = (spec.run)(&ctx)?;
    Ok(CheckOutcome {
        report: CheckReport::new(spec.name, spec.claim, body.rows, body.notes),
        table: body.table,
        plot: body.plot,
    })
}

/// Writes `<name>.csv` and, when present, `<name>.svg`.
pub fn write_artifacts(outcome: &CheckOutcome, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let name = &outcome.report.name;
    outcome.table.write(&dir.join(format!("{name}.csv")))?;
    if let Some(p) = &outcome.plot {
        emit_plot(p, &dir.join(format!("{name}.svg")))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Timing<'a> {
    check: &'a str,
    seconds: f64,
}

/// Config as echoed into reports: everything that influences the numbers.
pub fn config_echo(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or(serde_json::Value::Null)
}

/// Runs the given checks in order, writes their artifacts plus
/// `report.json` (deterministic) and `timing.json` (wall-clock) into `dir`.
/// A check that errors is recorded as failed and the suite continues.
pub fn run_suite(
    names: &[&str],
    config: &ExperimentConfig,
    dir: &Path,
    mut progress: impl FnMut(&CheckReport),
) -> Result<Report, HarnessError> {
    config.validate()?;
    for n in names {
        find(n)?;
    }
    std::fs::create_dir_all(dir)?;
    let mut reports = Vec::new();
    let mut timings = Vec::new();
    for &name in names {
        let spec = find(name)?;
        let start = Instant::now();
        let report = match run_check(name, config) {
            Ok(outcome) => {
                write_artifacts(&outcome, dir)?;
                outcome.report
            }
            Err(e) => CheckReport::failed(spec.name, spec.claim, &e),
        };
        timings.push(Timing { check: spec.name, seconds: start.elapsed().as_secs_f64() });
        progress(&report);
        reports.push(report);
    }
    let report = Report::new(config.seed()?, config_echo(config), reports);
    report.write(&dir.join("report.json"))?;
    std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timings)? + "\n")?;
    Ok(report)
}
