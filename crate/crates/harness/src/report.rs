//! Check results and their on-disk artifacts.
//!
//! `report.json` holds only deterministic content so that a rerun with the
//! same config and seed reproduces it byte for byte. Wall-clock times go to
//! a separate `timing.json`.

use crate::error::HarnessError;
use crate::plot::Plot;
use serde::Serialize;
use std::path::Path;

/// Pass threshold for statistical rows.
pub const Z_LIMIT: f64 = 3.0;

/// One compared quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    pub kind: RowKind,
    /// Target value, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Statistical,
    Deterministic,
}

impl Row {
    fn base(label: impl Into<String>, kind: RowKind, estimate: f64) -> Self {
        Self {
            label: label.into(),
            kind,
            analytic: None,
            estimate,
            std_error: None,
            z: None,
            error: None,
            tolerance: None,
            lower: None,
            upper: None,
            pass: false,
        }
    }

    /// Passes iff `|estimate - analytic| / se <= 3`.
    pub fn z_test(label: impl Into<String>, analytic: f64, estimate: f64, se: f64) -> Self {
        let z = catalytic_ou::stats::z_score(estimate, analytic, se);
        Self {
            analytic: Some(analytic),
            std_error: Some(se),
            z: Some(z),
            error: Some((estimate - analytic).abs()),
            pass: z.abs() <= Z_LIMIT,
            ..Self::base(label, RowKind::Statistical, estimate)
        }
    }

    /// Passes iff `|estimate - analytic| <= tol`.
    pub fn within(label: impl Into<String>, analytic: f64, estimate: f64, tol: f64) -> Self {
        let err = (estimate - analytic).abs();
        Self {
            analytic: Some(analytic),
            error: Some(err),
            tolerance: Some(tol),
            pass: err <= tol,
            ..Self::base(label, RowKind::Deterministic, estimate)
        }
    }

    /// Passes iff `estimate <= limit`.
    pub fn at_most(label: impl Into<String>, estimate: f64, limit: f64) -> Self {
        Self { upper: Some(limit), pass: estimate <= limit, ..Self::base(label, RowKind::Deterministic, estimate) }
    }

    /// Passes iff `lo < estimate < hi` (or `lo <= estimate <= hi` when `closed`).
    pub fn inside(label: impl Into<String>, estimate: f64, lo: f64, hi: f64, closed: bool) -> Self {
        let pass = if closed { lo <= estimate && estimate <= hi } else { lo < estimate && estimate < hi };
        Self { lower: Some(lo), upper: Some(hi), pass, ..Self::base(label, RowKind::Deterministic, estimate) }
    }

    /// A statistical interval statement, e.g. a bootstrap CI strictly above
    /// zero: passes iff `lower > bound`.
    pub fn interval_above(label: impl Into<String>, estimate: f64, lo: f64, hi: f64, bound: f64) -> Self {
        Self {
            lower: Some(lo),
            upper: Some(hi),
            analytic: Some(bound),
            pass: lo > bound,
            ..Self::base(label, RowKind::Statistical, estimate)
        }
    }

    /// Passes iff `lo <= target <= hi`.
    pub fn interval_contains(label: impl Into<String>, estimate: f64, lo: f64, hi: f64, target: f64) -> Self {
        Self {
            lower: Some(lo),
            upper: Some(hi),
            analytic: Some(target),
            pass: lo <= target && target <= hi,
            ..Self::base(label, RowKind::Statistical, estimate)
        }
    }

    pub fn flag(label: impl Into<String>, ok: bool) -> Self {
        Self { pass: ok, ..Self::base(label, RowKind::Deterministic, if ok { 1.0 } else { 0.0 }) }
    }
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    /// The property the check verifies, in words.
    pub claim: String,
    pub pass: bool,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckReport {
    pub fn new(name: &str, claim: &str, rows: Vec<Row>, notes: Vec<String>) -> Self {
        let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
        Self { name: name.into(), claim: claim.into(), pass, rows, notes, error: None }
    }

    pub fn failed(name: &str, claim: &str, err: &HarnessError) -> Self {
        Self { name: name.into(), claim: claim.into(), pass: false, rows: Vec::new(), notes: Vec::new(), error: Some(err.to_string()) }
    }

    /// One line per row, for terminal output.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = vec![format!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.name)];
        if let Some(e) = &self.error {
            out.push(format!("    error: {e}"));
        }
        for r in &self.rows {
            let mut s = format!("    [{}] {}: {}", if r.pass { "ok" } else { "!!" }, r.label, num(r.estimate));
            if let Some(a) = r.analytic {
                s.push_str(&format!(" vs {}", num(a)));
            }
            if let Some(z) = r.z {
                s.push_str(&format!(" (z = {z:.2})"));
            }
            if let Some(t) = r.tolerance {
                s.push_str(&format!(" (tol {t:.1e})"));
            }
            if let (Some(lo), Some(hi)) = (r.lower, r.upper) {
                s.push_str(&format!(" [{}, {}]", num(lo), num(hi)));
            } else if let Some(hi) = r.upper {
                s.push_str(&format!(" (limit {})", num(hi)));
            }
            out.push(s);
        }
        out
    }
}

fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

/// Rectangular data table written as `<check>.csv`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.into_iter().map(|c| c.0).collect());
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A formatted table cell. Floats use the shortest round-trip form.
pub struct Cell(pub String);

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell(format!("{v}"))
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell(v.to_string())
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell(v)
    }
}

#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { vec![$($crate::report::Cell::from($x)),*] };
}

/// Everything one check produces.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub report: CheckReport,
    pub table: Table,
    pub plot: Option<Plot>,
}

/// Build facts that do not depend on the machine's load or thread count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fingerprint {
    pub tool: String,
    pub version: String,
    pub os: String,
    pub arch: String,
    pub parallel_feature: bool,
    pub rng: String,
}

impl Fingerprint {
    pub fn current() -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            parallel_feature: cfg!(feature = "parallel"),
            rng: "ChaCha8, keyed per (seed, purpose), one stream per replica".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub environment: Fingerprint,
    pub seed: u64,
    pub config: serde_json::Value,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
}

impl Report {
    pub fn new(seed: u64, config: serde_json::Value, checks: Vec<CheckReport>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self { environment: Fingerprint::current(), seed, config, pass, checks }
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_rows() {
        assert!(Row::z_test("a", 1.0, 1.2, 0.1).pass);
        assert!(!Row::z_test("a", 1.0, 1.4, 0.1).pass);
        // Zero standard error: exact agreement passes, anything else fails.
        assert!(Row::z_test("a", 1.0, 1.0, 0.0).pass);
        assert!(!Row::z_test("a", 1.0, 1.1, 0.0).pass);
    }

    #[test]
    fn empty_check_does_not_pass() {
        assert!(!CheckReport::new("x", "y", Vec::new(), Vec::new()).pass);
    }

    #[test]
    fn floats_round_trip_in_tables() {
        let c = Cell::from(0.1 + 0.2);
        assert_eq!(c.0.parse::<f64>().unwrap(), 0.1 + 0.2);
    }
}
