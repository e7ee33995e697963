//! Experiment configuration: one JSON document with a section per check
//! and per CLI subcommand. Every field has a default, so `{"seed": 1}` is a
//! complete config. The resolved config is echoed into every report.

use crate::error::{invalid, HarnessError};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed. Required either here or via `--seed`.
    pub seed: Option<u64>,
    /// Overrides the main replica count of every Monte Carlo check.
    pub replicas: Option<usize>,
    /// Particle cap per simulated catalyst path.
    pub population_cap: usize,
    pub checks: CheckParams,
    pub simulate: SimulateParams,
    pub dual: DualParams,
    pub field: FieldParams,
    pub moments: MomentTableParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            replicas: None,
            population_cap: 2_000_000,
            checks: CheckParams::default(),
            simulate: SimulateParams::default(),
            dual: DualParams::default(),
            field: FieldParams::default(),
            moments: MomentTableParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> Result<u64, HarnessError> {
        self.seed.ok_or_else(|| HarnessError::Config("a seed is required (config \"seed\" or --seed)".into()))
    }

    /// Replica count for a check whose configured default is `own`.
    pub fn replicas_or(&self, own: usize) -> usize {
        self.replicas.unwrap_or(own)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.seed()?;
        if let Some(r) = self.replicas {
            if r < 2 {
                return invalid("replicas must be at least 2");
            }
        }
        if self.population_cap < 1000 {
            return invalid("population_cap must be at least 1000");
        }
        self.checks.validate()?;
        self.simulate.validate()?;
        self.dual.validate()?;
        self.field.validate()
    }
}

/// Parameters of the named verification checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CheckParams {
    pub atom_variance: AtomVarianceParams,
    pub mass_martingale: MassMartingaleParams,
    pub total_mass: TotalMassParams,
    pub first_moment: FirstMomentParams,
    pub second_moment: SecondMomentParams,
    pub occupation: OccupationParams,
    pub char_laplace: CharLaplaceParams,
    pub fourth_moment: FourthMomentParams,
    pub holder: HolderParams,
    pub kurtosis: KurtosisParams,
    pub dual_convergence: DualConvergenceParams,
    pub compose: ComposeParams,
    pub affine_ou: AffineParams,
    pub affine_cir: AffineParams,
}

impl CheckParams {
    fn validate(&self) -> Result<(), HarnessError> {
        let a = &self.atom_variance;
        positive("atom_variance.t", a.t)?;
        step("atom_variance.dt", a.dt, a.t)?;
        let m = &self.mass_martingale;
        scale("mass_martingale.n_scale", m.n_scale)?;
        scale("mass_martingale.bernoulli_n_scale", m.bernoulli_n_scale)?;
        step("mass_martingale.dt", m.dt, m.horizon)?;
        step("mass_martingale.bernoulli_dt", m.bernoulli_dt, m.horizon)?;
        let t = &self.total_mass;
        scale("total_mass.n_scale", t.n_scale)?;
        nonempty_positive("total_mass.lambdas", &t.lambdas)?;
        nonempty_positive("total_mass.times", &t.times)?;
        for &s in &t.times {
            let k = s / t.dt;
            if (k - k.round()).abs() > 1e-9 {
                return invalid("total_mass.times must be multiples of total_mass.dt");
            }
        }
        let f = &self.first_moment;
        scale("first_moment.n_scale", f.n_scale)?;
        nonempty_positive("first_moment.times", &f.times)?;
        positive("first_moment.smoothing", f.smoothing)?;
        let s = &self.second_moment;
        scale("second_moment.n_scale", s.n_scale)?;
        positive("second_moment.smoothing", s.smoothing)?;
        if s.time_pairs.is_empty() || s.time_pairs.iter().flatten().any(|&v| !(v > 0.0)) {
            return invalid("second_moment.time_pairs must be non-empty with positive times");
        }
        let o = &self.occupation;
        scale("occupation.n_scale", o.n_scale)?;
        step("occupation.dt", o.dt, o.t)?;
        grid_size("occupation.grid_n", o.grid_n)?;
        if o.step_pieces.is_empty() || o.step_pieces.iter().any(|&p| p == 0) {
            return invalid("occupation.step_pieces must be positive");
        }
        let c = &self.char_laplace;
        scale("char_laplace.n_scale", c.n_scale)?;
        step("char_laplace.dt", c.dt, c.t)?;
        grid_size("char_laplace.grid_n", c.grid_n)?;
        positive("char_laplace.bump_width", c.bump_width)?;
        if c.lambdas.iter().any(|&l| !(l >= 0.0)) {
            return invalid("char_laplace.lambdas must be non-negative");
        }
        let q = &self.fourth_moment;
        scale("fourth_moment.n_scale", q.n_scale)?;
        step("fourth_moment.dt", q.dt, q.t)?;
        grid_size("fourth_moment.grid_n", q.grid_n)?;
        nonempty_positive("fourth_moment.slope_times", &q.slope_times)?;
        let h = &self.holder;
        scale("holder.n_scale", h.n_scale)?;
        if h.time_points < 16 || h.modes == 0 || h.lag_levels < 4 {
            return invalid("holder needs time_points >= 16, modes >= 1 and lag_levels >= 4");
        }
        if !(h.sobolev_order > 0.5) {
            return invalid("holder.sobolev_order must exceed d/2 = 0.5");
        }
        let k = &self.kurtosis;
        scale("kurtosis.n_scale", k.n_scale)?;
        step("kurtosis.dt", k.dt, k.t)?;
        let d = &self.dual_convergence;
        if d.dts.len() < 3 || d.dts.windows(2).any(|w| !(w[1] < w[0])) {
            return invalid("dual_convergence.dts needs at least 3 decreasing steps");
        }
        grid_size("dual_convergence.grid_n", d.grid_n)?;
        grid_size("compose.grid_n", self.compose.grid_n)?;
        if !(0.0 < self.compose.split && self.compose.split < self.compose.t) {
            return invalid("compose.split must lie inside (0, t)");
        }
        self.affine_ou.validate("affine_ou")?;
        self.affine_cir.validate("affine_cir")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomVarianceParams {
    pub t: f64,
    pub x: f64,
    pub dt: f64,
    pub replicas: usize,
    /// Absolute tolerance on the estimate.
    pub abs_tol: f64,
}

impl Default for AtomVarianceParams {
    fn default() -> Self {
        Self { t: 1.0, x: 0.0, dt: 1e-3, replicas: 10_000, abs_tol: 0.005 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassMartingaleParams {
    pub n_scale: usize,
    pub dt: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub bernoulli_n_scale: usize,
    pub bernoulli_dt: f64,
    pub bernoulli_replicas: usize,
}

impl Default for MassMartingaleParams {
    fn default() -> Self {
        Self {
            n_scale: 200,
            dt: 0.05,
            horizon: 1.0,
            replicas: 4000,
            bernoulli_n_scale: 50,
            bernoulli_dt: 1e-3,
            bernoulli_replicas: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TotalMassParams {
    pub n_scale: usize,
    pub dt: f64,
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    pub replicas: usize,
}

impl Default for TotalMassParams {
    fn default() -> Self {
        Self { n_scale: 2000, dt: 0.5, lambdas: vec![0.5, 1.0, 2.0], times: vec![0.5, 1.0], replicas: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirstMomentParams {
    pub n_scale: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// Variance parameter `h²` of the smoothing kernel `p(h², x, ·)`.
    pub smoothing: f64,
    pub replicas: usize,
}

impl Default for FirstMomentParams {
    fn default() -> Self {
        Self { n_scale: 200, dt: 0.05, times: vec![0.5, 1.0], xs: vec![0.0, 0.5, 1.0], smoothing: 0.01, replicas: 10000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondMomentParams {
    pub n_scale: usize,
    pub dt: f64,
    pub time_pairs: Vec<[f64; 2]>,
    pub x_pairs: Vec<[f64; 2]>,
    pub smoothing: f64,
    pub replicas: usize,
    /// Tolerance for the Lebesgue diagonal value against `(2π)^{-1/2}`.
    pub diagonal_tol: f64,
}

impl Default for SecondMomentParams {
    fn default() -> Self {
        Self {
            n_scale: 100,
            dt: 0.01,
            time_pairs: vec![[1.0, 1.0], [0.5, 1.0]],
            x_pairs: vec![[0.0, 0.0], [0.0, 0.5]],
            smoothing: 0.01,
            replicas: 4000,
            diagonal_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupationParams {
    pub n_scale: usize,
    pub dt: f64,
    pub t: f64,
    pub replicas: usize,
    pub grid_n: usize,
    pub dual_dt: f64,
    /// Piece counts of the step-function approximations of a continuous `Φ`.
    pub step_pieces: Vec<usize>,
}

impl Default for OccupationParams {
    fn default() -> Self {
        Self { n_scale: 250, dt: 0.02, t: 1.0, replicas: 4000, grid_n: 256, dual_dt: 0.005, step_pieces: vec![4, 16, 64] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharLaplaceParams {
    pub n_scale: usize,
    pub dt: f64,
    pub t: f64,
    pub bump_center: f64,
    pub bump_width: f64,
    pub bump_weight: f64,
    pub lambdas: Vec<f64>,
    pub replicas: usize,
    pub grid_n: usize,
    pub dual_dt: f64,
}

impl Default for CharLaplaceParams {
    fn default() -> Self {
        Self {
            n_scale: 250,
            dt: 0.02,
            t: 1.0,
            bump_center: 0.0,
            bump_width: 0.5,
            bump_weight: 2.0,
            lambdas: vec![0.0, 0.5],
            replicas: 4000,
            grid_n: 256,
            dual_dt: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourthMomentParams {
    pub t: f64,
    pub slope_times: Vec<f64>,
    pub slope_limit: f64,
    pub n_scale: usize,
    pub dt: f64,
    pub replicas: usize,
    pub grid_n: usize,
    pub half_width: f64,
}

impl Default for FourthMomentParams {
    fn default() -> Self {
        Self {
            t: 0.5,
            slope_times: vec![0.25, 0.5, 1.0, 2.0],
            slope_limit: 2.1,
            n_scale: 50,
            dt: 0.01,
            replicas: 6000,
            grid_n: 512,
            half_width: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderParams {
    pub n_scale: usize,
    pub horizon: f64,
    pub time_points: usize,
    pub modes: usize,
    pub kappa: f64,
    pub sobolev_order: f64,
    pub lag_levels: usize,
    pub replicas: usize,
    pub band: [f64; 2],
    pub calibration_samples: usize,
    pub calibration_tol: f64,
}

impl Default for HolderParams {
    fn default() -> Self {
        Self {
            n_scale: 100,
            horizon: 0.25,
            time_points: 256,
            modes: 64,
            kappa: 0.5,
            sobolev_order: 1.0,
            lag_levels: 4,
            replicas: 64,
            band: [0.40, 0.55],
            calibration_samples: 20000,
            calibration_tol: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KurtosisParams {
    pub n_scale: usize,
    pub dt: f64,
    pub t: f64,
    pub bump_width: f64,
    pub replicas: usize,
}

impl Default for KurtosisParams {
    fn default() -> Self {
        Self { n_scale: 20, dt: 0.02, t: 1.0, bump_width: 0.5, replicas: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualConvergenceParams {
    pub lambda: f64,
    pub t: f64,
    pub dts: Vec<f64>,
    pub ratio_band: [f64; 2],
    pub grid_n: usize,
    pub picard_dt: f64,
    pub picard_tol: f64,
}

impl Default for DualConvergenceParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            t: 1.0,
            dts: vec![0.1, 0.05, 0.025, 0.0125],
            ratio_band: [3.2, 4.8],
            grid_n: 128,
            picard_dt: 0.005,
            picard_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposeParams {
    pub grid_n: usize,
    pub t: f64,
    pub split: f64,
    pub dt: f64,
    pub factor: f64,
}

impl Default for ComposeParams {
    fn default() -> Self {
        Self { grid_n: 256, t: 1.0, split: 0.37, dt: 0.03, factor: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineParams {
    pub b: f64,
    pub beta: f64,
    pub sigma: f64,
    pub x0s: Vec<f64>,
    pub t: f64,
    pub us: Vec<f64>,
    pub em_dt: f64,
    pub em_replicas: usize,
    pub collinearity_tol: f64,
    pub flow_tol: f64,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self {
            b: 0.5,
            beta: 1.0,
            sigma: 0.6,
            x0s: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            t: 1.0,
            us: vec![-0.5, -1.0, -2.0],
            em_dt: 0.01,
            em_replicas: 4000,
            collinearity_tol: 1e-10,
            flow_tol: 1e-8,
        }
    }
}

impl AffineParams {
    fn validate(&self, name: &str) -> Result<(), HarnessError> {
        positive(&format!("{name}.beta"), self.beta)?;
        positive(&format!("{name}.sigma"), self.sigma)?;
        step(&format!("{name}.em_dt"), self.em_dt, self.t)?;
        if self.x0s.len() < 3 {
            return invalid(format!("{name}.x0s needs at least three initial states"));
        }
        if self.us.is_empty() {
            return invalid(format!("{name}.us must not be empty"));
        }
        Ok(())
    }
}

/// `simulate-sbm` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub n_scale: usize,
    pub horizon: f64,
    pub dt: f64,
    pub kappa: f64,
    pub dimension: usize,
    /// Initial particles: `point` (all at the origin) or `uniform` on `[0, 1]`.
    pub initial: String,
    pub initial_mass: f64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self { n_scale: 100, horizon: 1.0, dt: 0.01, kappa: 1.0, dimension: 1, initial: "point".into(), initial_mass: 1.0 }
    }
}

impl SimulateParams {
    fn validate(&self) -> Result<(), HarnessError> {
        scale("simulate.n_scale", self.n_scale)?;
        step("simulate.dt", self.dt, self.horizon)?;
        positive("simulate.kappa", self.kappa)?;
        positive("simulate.initial_mass", self.initial_mass)?;
        if !(1..=2).contains(&self.dimension) {
            return invalid("simulate.dimension must be 1 or 2");
        }
        if self.initial != "point" && self.initial != "uniform" {
            return invalid("simulate.initial must be \"point\" or \"uniform\"");
        }
        Ok(())
    }
}

/// `solve-dual` subcommand: `u̇ = Δu - u^{1+β} + Φ` from a Gaussian bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualParams {
    pub grid_n: usize,
    pub half_width: f64,
    pub t: f64,
    pub dt: f64,
    pub beta: f64,
    pub bump_weight: f64,
    pub bump_width: f64,
    pub forcing: f64,
}

impl Default for DualParams {
    fn default() -> Self {
        Self { grid_n: 256, half_width: 6.0, t: 1.0, dt: 0.01, beta: 1.0, bump_weight: 1.0, bump_width: 0.5, forcing: 0.0 }
    }
}

impl DualParams {
    fn validate(&self) -> Result<(), HarnessError> {
        grid_size("dual.grid_n", self.grid_n)?;
        positive("dual.half_width", self.half_width)?;
        step("dual.dt", self.dt, self.t)?;
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return invalid("dual.beta must lie in (0, 1]");
        }
        if !(self.forcing >= 0.0) || !(self.bump_weight >= 0.0) {
            return invalid("dual forcing and bump weight must be non-negative");
        }
        Ok(())
    }
}

/// `sample-field` subcommand: quenched field values at points of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    pub n_scale: usize,
    pub t: f64,
    pub dt: f64,
    pub points: Vec<f64>,
    pub kappa: f64,
    pub replicas: usize,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self { n_scale: 50, t: 0.5, dt: 0.01, points: vec![0.1, 0.3, 0.5, 0.7, 0.9], kappa: 0.5, replicas: 100 }
    }
}

impl FieldParams {
    fn validate(&self) -> Result<(), HarnessError> {
        scale("field.n_scale", self.n_scale)?;
        step("field.dt", self.dt, self.t)?;
        positive("field.kappa", self.kappa)?;
        if self.points.is_empty() {
            return invalid("field.points must not be empty");
        }
        Ok(())
    }
}

/// `moments` subcommand: analytic moment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentTableParams {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
}

impl Default for MomentTableParams {
    fn default() -> Self {
        Self { times: vec![0.25, 0.5, 1.0, 2.0], xs: vec![0.0, 0.5, 1.0] }
    }
}

fn positive(name: &str, v: f64) -> Result<(), HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}

fn step(name: &str, dt: f64, horizon: f64) -> Result<(), HarnessError> {
    positive(name, dt)?;
    if dt > horizon {
        return invalid(format!("{name} = {dt} exceeds the horizon {horizon}"));
    }
    Ok(())
}

fn scale(name: &str, n: usize) -> Result<(), HarnessError> {
    if (1..=1_000_000).contains(&n) {
        Ok(())
    } else {
        invalid(format!("{name} must lie in [1, 1e6], got {n}"))
    }
}

fn grid_size(name: &str, n: usize) -> Result<(), HarnessError> {
    if (16..=1 << 16).contains(&n) {
        Ok(())
    } else {
        invalid(format!("{name} must lie in [16, 65536], got {n}"))
    }
}

fn nonempty_positive(name: &str, v: &[f64]) -> Result<(), HarnessError> {
    if v.is_empty() || v.iter().any(|&x| !(x > 0.0)) {
        return invalid(format!("{name} must be non-empty and positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(r#"{"seed": 7}"#).unwrap();
        assert_eq!(c.seed, Some(7));
        c.validate().unwrap();
    }

    #[test]
    fn seed_is_mandatory() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "sead": 2}"#).is_err());
    }

    #[test]
    fn bad_step_is_rejected() {
        let c = ExperimentConfig::from_json(r#"{"seed": 1, "checks": {"atom_variance": {"dt": 2.0}}}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
