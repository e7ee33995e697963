//! Catalyst simulation helpers shared by the checks.

use crate::error::{invalid, HarnessError};
use catalytic_ou::kernels::HeatKernelParams;
use catalytic_ou::rng::StreamRng;
use catalytic_ou::superprocess::{
    simulate_sbm, BranchingScheme, CatalystPath, ParticleMeasure, SbmOptions, SbmStepper,
};

/// Catalyst motion: Brownian motion with generator `Δ`.
pub(crate) fn catalyst_kernel() -> HeatKernelParams {
    HeatKernelParams::gaussian(1.0, 1)
}

pub(crate) fn sbm_options(n_scale: usize, horizon: f64, dt: f64, cap: usize, scheme: BranchingScheme) -> SbmOptions {
    SbmOptions { n_scale, horizon, dt, scheme, population_cap: cap }
}

/// Step indices at which `times` fall on the simulation grid.
pub(crate) fn grid_indices(times: &[f64], opts: &SbmOptions) -> Result<Vec<usize>, HarnessError> {
    let (_, dt) = opts.grid();
    times
        .iter()
        .map(|&t| {
            let k = t / dt;
            if (k - k.round()).abs() > 1e-6 {
                invalid(format!("time {t} is not on the simulation grid (step {dt})"))
            } else {
                Ok(k.round() as usize)
            }
        })
        .collect()
}

/// States at the requested step indices (sorted ascending) of one particle
/// system started from `initial`.
pub(crate) fn snapshots(
    initial: &ParticleMeasure,
    opts: &SbmOptions,
    steps: &[usize],
    rng: StreamRng,
) -> catalytic_ou::Result<Vec<ParticleMeasure>> {
    let mut stepper = SbmStepper::new(initial, opts, &catalyst_kernel(), rng)?;
    let mut out = Vec::with_capacity(steps.len());
    let mut at = 0;
    for &k in steps {
        while at < k {
            stepper.step()?;
            at += 1;
        }
        out.push(stepper.state().clone());
    }
    Ok(out)
}

/// Recorded catalyst path from `N` particles at the origin (unit mass).
pub(crate) fn point_start_path(opts: &SbmOptions, seed: u64) -> catalytic_ou::Result<CatalystPath> {
    let initial = ParticleMeasure::point_mass(&[0.0], 1.0, opts.n_scale);
    simulate_sbm(&initial, opts, &catalyst_kernel(), seed)
}
