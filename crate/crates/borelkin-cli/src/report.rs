//! JSON report shapes shared by the subcommands.

use serde::Serialize;

/// One verified relation in a `verify` report. Relation tags are the short
/// label names used throughout the project (Qcom, PQcom, parhom, loc-cons,
/// wcom, wecom, cm-Ehr, …) so reports can be cross-referenced.
#[derive(Debug, Serialize)]
pub struct RelationResult {
    pub relation: String,
    pub description: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl RelationResult {
    pub fn new(relation: &str, description: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            relation: relation.to_string(),
            description: description.to_string(),
            residual,
            tolerance,
            pass: residual < tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub results: Vec<RelationResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn new(suite: &str, results: Vec<RelationResult>) -> Self {
        let passed = results.iter().all(|r| r.pass);
        Self { suite: suite.to_string(), results, passed }
    }
}

/// Run summary written next to the diagnostics CSV.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub steps: usize,
    pub t_final: f64,
    pub final_norm: f64,
    pub norm_drift: f64,
    pub min_density: f64,
    pub max_ehrenfest: f64,
    pub max_fp_residual: f64,
    pub max_boundary_mass: f64,
    pub snapshots: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
pub struct FieldCheckReport {
    pub phi0: f64,
    pub coupling: f64,
    pub hbar: f64,
    pub extents: [f64; 2],
    pub flux: f64,
    pub cycle_value: f64,
    pub nearest_integer: i64,
    pub integrality_residual: f64,
    pub admissible: bool,
    pub n_nearest: i64,
    pub phi0_nearest: f64,
    pub dirac_residual: f64,
    pub lattice_spacing: f64,
}

#[derive(Debug, Serialize)]
pub struct GaugeFitRow {
    pub lambda: f64,
    pub gamma: f64,
    pub kinetic: f64,
    pub v_const: f64,
    pub c_diffusive: f64,
    pub d_im: [f64; 5],
    pub residual: f64,
    pub condition: f64,
    pub blind_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct GaugeFitReport {
    pub rows: Vec<GaugeFitRow>,
}
