//! External-field admissibility on the torus: curvature scale, the flux
//! integrality obstruction, and the quantization condition for constant
//! fields.
//!
//! A field two-form φ with coupling e is realizable as the curvature of a
//! line bundle only when its flux through the fundamental 2-cycle is an
//! integer in units of `2πħ/e`; both statements of that constraint are
//! implemented and pinned against each other: `q = e·∮φ/(2πħ) ∈ ℤ` and,
//! for constant φ₀ on the torus, `φ₀ = ħ·n/(2πe)`.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::geometry::{two_form_integral, GeometryError, TwoForm};
use crate::manifold::Grid;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle: hbar must be strictly positive, got {0}")]
    NonPositiveHbar(f64),
    #[error("bundle: zero coupling imposes no quantization constraint")]
    ZeroCoupling,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// External-field data: the two-form φ, the coupling (charge) e, and ħ.
#[derive(Debug, Clone)]
pub struct FieldConfig {
    pub phi: TwoForm,
    pub e: f64,
    pub hbar: f64,
}

impl FieldConfig {
    pub fn new(phi: TwoForm, e: f64, hbar: f64) -> Result<Self, BundleError> {
        if !(hbar > 0.0) {
            return Err(BundleError::NonPositiveHbar(hbar));
        }
        Ok(Self { phi, e, hbar })
    }
}

/// Scalar factor `e/ħ` mapping φ-values to curvature magnitudes; the
/// curvature of the bundle is `(ie/ħ)·φ(X,Y)` and the imaginary unit is
/// bookkeeping, not data.
pub fn curvature_scale(config: &FieldConfig) -> f64 {
    config.e / config.hbar
}

/// Outcome of the flux integrality check on the torus fundamental cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralityReport {
    /// `q = e·∮φ / (2πħ)`
    pub cycle_value: f64,
    pub nearest_integer: i64,
    pub residual: f64,
    pub admissible: bool,
}

/// Default residual tolerance for exactly-representable flux inputs.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// Check whether `q = e·∮φ/(2πħ)` is an integer within `tol`; the flux is
/// taken over the fundamental 2-cycle of the torus.
pub fn integrality_check(
    config: &FieldConfig,
    grid: &Grid,
    tol: f64,
) -> Result<IntegralityReport, BundleError> {
    let flux = two_form_integral(&config.phi, grid)?;
    let q = config.e * flux / (TAU * config.hbar);
    let nearest = q.round();
    let residual = (q - nearest).abs();
    Ok(IntegralityReport {
        cycle_value: q,
        nearest_integer: nearest as i64,
        residual,
        admissible: residual < tol,
    })
}

/// Nearest admissible constant field on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracReport {
    pub n_nearest: i64,
    pub phi0_nearest: f64,
    pub residual: f64,
}

/// Quantization condition for a constant field φ₀ on the torus: admissible
/// values form the lattice `φ₀ = ħ·n/(2πe)`. Returns the nearest lattice
/// point; `e = 0` is rejected since the constraint disappears.
pub fn dirac_admissible(phi0: f64, e: f64, hbar: f64) -> Result<DiracReport, BundleError> {
    if !(hbar > 0.0) {
        return Err(BundleError::NonPositiveHbar(hbar));
    }
    if e == 0.0 {
        return Err(BundleError::ZeroCoupling);
    }
    let n = (TAU * e * phi0 / hbar).round();
    let phi0_nearest = hbar * n / (TAU * e);
    Ok(DiracReport {
        n_nearest: n as i64,
        phi0_nearest,
        residual: (phi0 - phi0_nearest).abs(),
    })
}

/// Spacing of the admissible constant-field lattice, `ħ/(2πe)`.
pub fn admissible_lattice_spacing(e: f64, hbar: f64) -> f64 {
    hbar / (TAU * e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldSpec;

    fn torus_grid() -> Grid {
        Grid::new(ManifoldSpec::torus2(TAU, TAU).unwrap(), vec![32, 32]).unwrap()
    }

    #[test]
    fn curvature_scale_ratios() {
        let grid = torus_grid();
        let phi = TwoForm::zero(&grid).unwrap();
        let mk = |e, hbar| FieldConfig::new(TwoForm::clone(&phi), e, hbar).unwrap();
        assert_eq!(curvature_scale(&mk(0.0, 1.0)), 0.0);
        assert_eq!(curvature_scale(&mk(1.0, 1.0)), 1.0);
        assert_eq!(curvature_scale(&mk(2.0, 0.5)), 4.0);
    }

    #[test]
    fn zero_field_is_admissible() {
        let grid = torus_grid();
        let config = FieldConfig::new(TwoForm::zero(&grid).unwrap(), 1.0, 1.0).unwrap();
        let report = integrality_check(&config, &grid, INTEGRALITY_TOL).unwrap();
        assert_eq!(report.cycle_value, 0.0);
        assert!(report.admissible);
    }

    #[test]
    fn lattice_field_is_admissible() {
        // φ₀ = ħ/(2πe)·n with n = 3: flux = φ₀(2π)², q = e·flux/(2πħ) = 3.
        let grid = torus_grid();
        let (e, hbar, n) = (1.0, 1.0, 3.0);
        let phi0 = hbar / (TAU * e) * n;
        let config =
            FieldConfig::new(TwoForm::constant(&grid, phi0).unwrap(), e, hbar).unwrap();
        let report = integrality_check(&config, &grid, INTEGRALITY_TOL).unwrap();
        assert_eq!(report.nearest_integer, 3);
        assert!(report.residual < 1e-12, "residual {:.3e}", report.residual);
        assert!(report.admissible);
    }

    #[test]
    fn generic_field_is_rejected_with_nearest_level() {
        // φ₀ = 0.3, e = ħ = 1: q = 0.3·2π ≈ 1.885, nearest 2.
        let grid = torus_grid();
        let config =
            FieldConfig::new(TwoForm::constant(&grid, 0.3).unwrap(), 1.0, 1.0).unwrap();
        let report = integrality_check(&config, &grid, INTEGRALITY_TOL).unwrap();
        assert!((report.cycle_value - 0.3 * TAU).abs() < 1e-12);
        assert_eq!(report.nearest_integer, 2);
        assert!(!report.admissible);
    }

    #[test]
    fn dirac_nearest_levels() {
        let zero = dirac_admissible(0.0, 1.0, 1.0).unwrap();
        assert_eq!(zero.n_nearest, 0);
        assert_eq!(zero.residual, 0.0);

        // φ₀ = 1/(2π) is exactly the n = 1 level.
        let level1 = dirac_admissible(1.0 / TAU, 1.0, 1.0).unwrap();
        assert_eq!(level1.n_nearest, 1);
        assert!(level1.residual < 1e-15);

        // φ₀ = 0.3 sits nearest n = 2, φ₀* = 1/π.
        let generic = dirac_admissible(0.3, 1.0, 1.0).unwrap();
        assert_eq!(generic.n_nearest, 2);
        assert!((generic.phi0_nearest - 2.0 / TAU).abs() < 1e-15);
        assert!((generic.residual - (2.0 / TAU - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn dirac_rejects_zero_coupling() {
        assert!(matches!(dirac_admissible(0.1, 0.0, 1.0), Err(BundleError::ZeroCoupling)));
    }

    #[test]
    fn integrality_and_dirac_agree_on_constant_fields() {
        let grid = torus_grid();
        let (e, hbar) = (1.3, 0.7);
        let spacing = admissible_lattice_spacing(e, hbar);
        for i in 0..40 {
            // Alternate lattice points and generic values.
            let phi0 = if i % 2 == 0 {
                spacing * (i as f64 / 2.0 - 7.0)
            } else {
                0.05 + 0.217 * i as f64
            };
            let config =
                FieldConfig::new(TwoForm::constant(&grid, phi0).unwrap(), e, hbar).unwrap();
            let integral = integrality_check(&config, &grid, 1e-6).unwrap();
            let dirac = dirac_admissible(phi0, e, hbar).unwrap();
            let dirac_ok = dirac.residual < 1e-6 * spacing;
            assert_eq!(integral.admissible, dirac_ok, "phi0 = {phi0}");
        }
    }

    #[test]
    fn lattice_spacing_scale_covariance_is_exact() {
        let hbar = 0.9;
        for e in [0.3, 1.0, 2.7] {
            let s = admissible_lattice_spacing(e, hbar);
            let s2 = admissible_lattice_spacing(2.0 * e, hbar);
            // Doubling the coupling halves the spacing, bit-exactly.
            assert_eq!(s2 * 2.0, s);
        }
    }
}
