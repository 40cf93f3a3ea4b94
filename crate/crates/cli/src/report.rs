//! Versioned JSON and CSV outputs.

use std::fs;
use std::path::Path;

use balanced_core::continuation::{PathReport, StepRecord};
use serde::Serialize;

use crate::verify::Row;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct LatticeInfo {
    pub points: usize,
    pub axes: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub lattice: LatticeInfo,
    pub passed: bool,
    pub rows: Vec<Row>,
}

#[derive(Debug, Serialize)]
pub struct ResidualReport {
    pub schema_version: u32,
    pub alpha: f64,
    pub hym_l2: f64,
    pub hym_max: f64,
    pub anomaly_l2: f64,
    pub anomaly_max: f64,
    pub tangent_l2: Option<f64>,
    pub ellipticity: f64,
    /// `α′^{−1/2}|Ω|_ω̂`; null at `α′ = 0`.
    pub class_factor: Option<f64>,
    pub positivity: f64,
}

#[derive(Debug, Serialize)]
pub struct SquareRootReport {
    pub schema_version: u32,
    /// `max |(|Ω|_g g²) − Ψ| / max |Ψ|` for the extracted `g`.
    pub residual: f64,
    pub min_eigenvalue: f64,
    /// Relative distance to the background metric when `Ψ` was built from it.
    pub reference_error: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct LinearizeReport {
    pub schema_version: u32,
    pub steps: Vec<f64>,
    /// Max-norm error of centered differences of `F` against the blocks.
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    /// Part of the errors in the anomaly component alone.
    pub anomaly_errors: Vec<f64>,
    /// Max of the anomaly response to a pure `u` direction.
    pub block21: f64,
    pub round_trip: f64,
    pub samples: usize,
    pub passed: bool,
    pub rows: Vec<Row>,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub coupled: bool,
    pub manufactured: bool,
    pub amplitude: f64,
    pub completed: bool,
    pub alpha_reached: f64,
    pub stop_reason: Option<String>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_newton_iterations: usize,
    pub final_residual: f64,
    pub recovery_error: Option<f64>,
    pub max_quadratic_ratio: Option<f64>,
    pub max_ellipticity: f64,
    pub min_positivity: f64,
    pub class_factor: Option<f64>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn new(path: &PathReport, coupled: bool, manufactured: bool, amplitude: f64) -> SolveReport {
        let r = &path.records;
        let last = r.last().expect("at least the start record");
        SolveReport {
            schema_version: SCHEMA_VERSION,
            coupled,
            manufactured,
            amplitude,
            completed: path.completed,
            alpha_reached: path.alpha_reached,
            stop_reason: path.stop_reason.clone(),
            accepted_steps: r.len() - 1,
            rejected_steps: path.rejected_steps,
            max_newton_iterations: r.iter().map(|s| s.newton_iterations).max().unwrap_or(0),
            final_residual: last.residual,
            recovery_error: last.recovery_error,
            max_quadratic_ratio: r.iter().filter_map(|s| s.quadratic_ratio).reduce(f64::max),
            max_ellipticity: r.iter().map(|s| s.ellipticity).fold(0.0, f64::max),
            min_positivity: r.iter().map(|s| s.positivity).fold(f64::INFINITY, f64::min),
            class_factor: last.class_factor,
            warnings: path.warnings.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct PathRow {
    schema_version: u32,
    alpha: f64,
    step: f64,
    residual: f64,
    hym_l2: f64,
    anomaly_l2: f64,
    tangent_l2: f64,
    newton_iterations: usize,
    krylov_iterations: usize,
    ellipticity: f64,
    positivity: f64,
    class_factor: Option<f64>,
    recovery_error: Option<f64>,
    quadratic_ratio: Option<f64>,
}

impl From<&StepRecord> for PathRow {
    fn from(s: &StepRecord) -> Self {
        PathRow {
            schema_version: SCHEMA_VERSION,
            alpha: s.alpha,
            step: s.step,
            residual: s.residual,
            hym_l2: s.hym_l2,
            anomaly_l2: s.anomaly_l2,
            tangent_l2: s.tangent_l2,
            newton_iterations: s.newton_iterations,
            krylov_iterations: s.krylov_iterations,
            ellipticity: s.ellipticity,
            positivity: s.positivity,
            class_factor: s.class_factor,
            recovery_error: s.recovery_error,
            quadratic_ratio: s.quadratic_ratio,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn write_path_csv(path: &Path, records: &[StepRecord]) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(out)?;
    for r in records {
        w.serialize(PathRow::from(r)).map_err(out)?;
    }
    w.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn print_rows(rows: &[Row]) {
    println!("{:<44} {:>12} {:>10}  status", "id", "measured", "tolerance");
    for r in rows {
        let m = r.measured.map_or_else(|| "-".to_string(), |m| format!("{m:.3e}"));
        let status = match r.status {
            crate::verify::Status::Pass => "pass",
            crate::verify::Status::Fail => "FAIL",
            crate::verify::Status::Skip => "skip",
        };
        println!("{:<44} {:>12} {:>10.1e}  {status}", r.id, m, r.tolerance);
        if let Some(n) = &r.note {
            println!("    {n}");
        }
    }
}
