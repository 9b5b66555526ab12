//! `check-field`: admissibility verdict for a constant external field on the
//! square torus, via both the flux-integrality check and the constant-field
//! quantization lattice.

use anyhow::Result;

use borelkin::bundle::{
    admissible_lattice_spacing, dirac_admissible, integrality_check, FieldConfig,
    INTEGRALITY_TOL,
};
use borelkin::geometry::{two_form_integral, TwoForm};
use borelkin::manifold::{Grid, ManifoldSpec};

use crate::report::FieldCheckReport;

pub fn run(phi0: f64, e: f64, hbar: f64, extent: f64) -> Result<i32> {
    let spec = ManifoldSpec::torus2(extent, extent)?;
    let grid = Grid::new(spec, vec![32, 32])?;
    let phi = TwoForm::constant(&grid, phi0)?;
    let flux = two_form_integral(&phi, &grid)?;
    let config = FieldConfig::new(phi, e, hbar)?;
    let integral = integrality_check(&config, &grid, INTEGRALITY_TOL)?;
    let dirac = dirac_admissible(phi0, e, hbar)?;

    let report = FieldCheckReport {
        phi0,
        coupling: e,
        hbar,
        extents: [extent, extent],
        flux,
        cycle_value: integral.cycle_value,
        nearest_integer: integral.nearest_integer,
        integrality_residual: integral.residual,
        admissible: integral.admissible,
        n_nearest: dirac.n_nearest,
        phi0_nearest: dirac.phi0_nearest,
        dirac_residual: dirac.residual,
        lattice_spacing: admissible_lattice_spacing(e, hbar),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.admissible {
        println!(
            "admissible: flux quantum q = {:.6} is the integer level n = {}",
            report.cycle_value, report.nearest_integer
        );
    } else {
        println!(
            "not admissible: q = {:.6}; nearest level n = {} at phi0 = {:.9} (off by {:.3e})",
            report.cycle_value, report.n_nearest, report.phi0_nearest, report.dirac_residual
        );
    }
    Ok(0)
}
