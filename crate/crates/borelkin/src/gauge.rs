//! Nonlinear gauge transformations and the linearizability oracle.
//!
//! The transformation `N_{(Λ,γ)}[ψ] := ψ^{(1+Λ+iγ)/2} ψ̄^{(1−Λ+iγ)/2}` acts on
//! polar data as `(ρ, S) ↦ (ρ, ΛS + (γ/2)·ln ρ)`: the density is untouched,
//! which is why the implementation works in polar form with grid phase
//! unwrapping instead of complex powers (whose branch cuts are unreliable).
//! Only nodeless states are admitted, and non-integer Λ on states with
//! nonzero winding is rejected: the image would be multivalued.
//!
//! [`linearization_fit`] is the numerical content of the linearizability of
//! a subfamily of the nonlinear evolutions: gauge-transforming an exactly
//! propagated linear trajectory and regressing `∂_t ψ'/ψ'` onto the family's
//! functional basis must land inside the family (small residual), with the
//! identity gauge recovering the linear equation itself.

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{rj_functionals, CurrentScale, DGParams, DynamicsError};
use crate::geometry::{twisted_laplacian_scaled, GeometryError};
use crate::state::{StateError, WaveFunction};

#[derive(Debug, Error)]
pub enum GaugeError {
    #[error("gauge: lambda must be nonzero")]
    ZeroLambda,
    #[error("gauge: node detected (density {value:.3e} below floor {floor:.3e} at {index})")]
    NodeDetected { index: usize, value: f64, floor: f64 },
    #[error(
        "gauge: non-integer lambda {lambda} on a state with winding {winding} along axis {axis} \
         would be multivalued"
    )]
    Multivalued { lambda: f64, winding: i64, axis: usize },
    #[error("gauge: fit needs at least {need} snapshots, got {got}")]
    TooFewSnapshots { need: usize, got: usize },
    #[error("gauge: snapshot grids do not match")]
    GridMismatch,
    #[error("gauge: normal system is rank-deficient (condition {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Gauge labels `(Λ, γ)`, `Λ ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeParams {
    lambda: f64,
    gamma: f64,
}

impl GaugeParams {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self, GaugeError> {
        if lambda == 0.0 || !lambda.is_finite() || !gamma.is_finite() {
            return Err(GaugeError::ZeroLambda);
        }
        Ok(Self { lambda, gamma })
    }

    pub fn identity() -> Self {
        Self { lambda: 1.0, gamma: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Inverse under composition: `(1/Λ, −γ/Λ)`.
    pub fn inverse(&self) -> GaugeParams {
        Self { lambda: 1.0 / self.lambda, gamma: -self.gamma / self.lambda }
    }
}

/// Composition law of the polar-form action:
/// `(Λ₁,γ₁)∘(Λ₂,γ₂) = (Λ₁Λ₂, γ₁ + Λ₁γ₂)` (apply `g2` first).
pub fn compose_gauge(g1: &GaugeParams, g2: &GaugeParams) -> GaugeParams {
    GaugeParams {
        lambda: g1.lambda * g2.lambda,
        gamma: g1.gamma + g1.lambda * g2.gamma,
    }
}

// ---------------------------------------------------------------------------
// Polar decomposition with phase unwrapping
// ---------------------------------------------------------------------------

/// Density, continuously unwrapped phase, and per-axis winding numbers.
#[derive(Debug, Clone)]
pub struct PolarForm {
    pub rho: Vec<f64>,
    pub phase: Vec<f64>,
    pub winding: Vec<i64>,
}

fn principal_delta(a: Complex64, b: Complex64) -> f64 {
    // arg(a·conj(b)) ∈ (−π, π]: the phase step from b to a.
    (a * b.conj()).arg()
}

/// Polar-decompose a nodeless state. The phase is unwrapped along grid lines
/// (last axis first, then anchored across the remaining axes), so it is
/// continuous as a sampled function; the winding numbers record the total
/// phase turn around each fundamental cycle in units of 2π.
pub fn polar_decompose(psi: &WaveFunction, floor: f64) -> Result<PolarForm, GaugeError> {
    let grid = psi.grid();
    let rho = psi.density();
    for (i, &r) in rho.iter().enumerate() {
        if r < floor || r == 0.0 {
            return Err(GaugeError::NodeDetected { index: i, value: r, floor });
        }
    }
    let data = psi.data();
    let shape = grid.shape();
    let ndim = shape.len();
    let strides: Vec<usize> =
        (0..ndim).map(|d| shape[d + 1..].iter().product()).collect();

    let mut phase = vec![0.0f64; grid.len()];
    phase[0] = data[0].arg();
    for flat in 1..grid.len() {
        let idx = grid.multi_index(flat);
        // Predecessor: step back along the last axis with a nonzero index.
        let d = (0..ndim).rev().find(|&d| idx[d] > 0).expect("flat > 0");
        let pred = flat - strides[d];
        phase[flat] = phase[pred] + principal_delta(data[flat], data[pred]);
    }

    // Winding along each axis from a representative cycle through the origin.
    let mut winding = vec![0i64; ndim];
    for d in 0..ndim {
        let n = shape[d];
        let mut total = 0.0;
        let mut prev = 0usize;
        for i in 1..n {
            let cur = i * strides[d];
            total += principal_delta(data[cur], data[prev]);
            prev = cur;
        }
        total += principal_delta(data[0], data[prev]);
        winding[d] = (total / std::f64::consts::TAU).round() as i64;
    }

    Ok(PolarForm { rho, phase, winding })
}

/// Apply `N_{(Λ,γ)}` in polar form: `(ρ, S) ↦ (ρ, ΛS + (γ/2)ln ρ)`.
/// Rejects states with density under `floor` and non-integer `Λ` on states
/// with nonzero winding (seam mismatch).
pub fn apply_gauge(
    psi: &WaveFunction,
    g: &GaugeParams,
    floor: f64,
) -> Result<WaveFunction, GaugeError> {
    let polar = polar_decompose(psi, floor)?;
    for (axis, &w) in polar.winding.iter().enumerate() {
        if w != 0 {
            let scaled = g.lambda * w as f64;
            if (scaled - scaled.round()).abs() > 1e-9 {
                return Err(GaugeError::Multivalued { lambda: g.lambda, winding: w, axis });
            }
        }
    }
    let data = transform_polar(&polar, g);
    Ok(WaveFunction::from_raw(psi.grid().clone(), data))
}

fn transform_polar(polar: &PolarForm, g: &GaugeParams) -> Vec<Complex64> {
    polar
        .rho
        .iter()
        .zip(&polar.phase)
        .map(|(&r, &s)| {
            let s_new = g.lambda * s + 0.5 * g.gamma * r.ln();
            Complex64::from_polar(r.sqrt(), s_new)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Linearization fit
// ---------------------------------------------------------------------------

/// Functional basis used in the regression. `CurrentSquaredBlind` is the
/// deliberate control: it removes every way to express the squared-current
/// content (the `iR₃` column *and* the `−|grad S|²` part of the kinetic
/// column), so a flow that genuinely carries that term cannot be fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitBasis {
    #[default]
    Full,
    CurrentSquaredBlind,
}

/// Regression output. `kinetic, v_const` multiply `i·Δ^ω ψ/ψ` and `i·1`;
/// `c_diffusive` multiplies the real column `Δρ/ρ`; `d_im[j]` multiplies
/// `i·R_{j+1}`. In evolution-equation units the kinetic prefactor is
/// `2·kinetic/ħ` (1 for the linear equation), the imaginary-nonlinearity
/// strength is `2·c_diffusive` and the functional coefficients are
/// `−ħ·d_im[j]`.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub kinetic: f64,
    pub v_const: f64,
    pub c_diffusive: f64,
    pub d_im: [f64; 5],
    pub residual: f64,
    pub condition: f64,
}

impl FitReport {
    /// Largest fitted nonlinear coefficient (everything except the kinetic
    /// and potential columns).
    pub fn max_nonlinear(&self) -> f64 {
        self.d_im
            .iter()
            .map(|v| v.abs())
            .fold(self.c_diffusive.abs(), f64::max)
    }
}

/// Gauge-transform an exactly propagated linear trajectory (uniform spacing
/// `dt`, ≥5 snapshots) and least-squares fit `∂_t ψ'/ψ'` against the
/// evolution family's basis
/// `{i·Δ^ω, i·1, Δρ/ρ, i·R₁ … i·R₅}` with real coefficients.
///
/// The time derivative uses the 5-point centered stencil (4th order), which
/// is why five snapshots is the minimum. A small relative residual certifies
/// that the transformed flow lies inside the family; the identity gauge must
/// recover the linear equation (kinetic `ħ/2`, everything else ≈ 0).
pub fn linearization_fit(
    trajectory: &[WaveFunction],
    dt: f64,
    g: &GaugeParams,
    params: &DGParams,
    basis: FitBasis,
) -> Result<FitReport, GaugeError> {
    if trajectory.len() < 5 {
        return Err(GaugeError::TooFewSnapshots { need: 5, got: trajectory.len() });
    }
    let grid = trajectory[0].grid().clone();
    for w in trajectory {
        if w.grid() != &grid {
            return Err(GaugeError::GridMismatch);
        }
    }
    let floor = params.density_floor;

    // Polar data with temporally coherent phase anchors: without the
    // re-anchoring a 2π hop of arg(ψ[0]) between snapshots would put a jump
    // of 2πΛ into the transformed states and wreck the time derivative.
    let mut polars = Vec::with_capacity(trajectory.len());
    for (n, snap) in trajectory.iter().enumerate() {
        let mut polar = polar_decompose(snap, floor)?;
        if n > 0 {
            let prev: &PolarForm = &polars[n - 1];
            let hop = ((polar.phase[0] - prev.phase[0]) / std::f64::consts::TAU).round();
            if hop != 0.0 {
                for s in polar.phase.iter_mut() {
                    *s -= hop * std::f64::consts::TAU;
                }
            }
        }
        polars.push(polar);
    }
    for (axis, &w) in polars[0].winding.iter().enumerate() {
        if w != 0 {
            let scaled = g.lambda * w as f64;
            if (scaled - scaled.round()).abs() > 1e-9 {
                return Err(GaugeError::Multivalued { lambda: g.lambda, winding: w, axis });
            }
        }
    }

    let transformed: Vec<Vec<Complex64>> =
        polars.iter().map(|p| transform_polar(p, g)).collect();

    let hbar = params.kin.hbar();
    let n_points = grid.len();
    let interior: Vec<usize> = (2..trajectory.len() - 2).collect();
    let n_rows_complex = interior.len() * n_points;
    let n_cols = 8;

    let mut a = nalgebra::DMatrix::<f64>::zeros(2 * n_rows_complex, n_cols);
    let mut y = nalgebra::DVector::<f64>::zeros(2 * n_rows_complex);

    // Strip factor turning R₃ back into |grad S|² for the blind control.
    let r3_to_grad_sq = match params.rj_current {
        CurrentScale::Double => 1.0 / (4.0 * hbar * hbar),
        CurrentScale::Single => 1.0 / (hbar * hbar),
    };

    for (block, &n) in interior.iter().enumerate() {
        let psi_n = WaveFunction::from_raw(grid.clone(), transformed[n].clone());
        // 5-point centered derivative.
        let dpsi: Vec<Complex64> = (0..n_points)
            .map(|i| {
                (transformed[n - 2][i] - transformed[n - 1][i] * 8.0
                    + transformed[n + 1][i] * 8.0
                    - transformed[n + 2][i])
                    / (12.0 * dt)
            })
            .collect();

        let kinetic_field = twisted_laplacian_scaled(
            psi_n.data(),
            params.kin.omega(),
            hbar,
            params.twist,
            &grid,
        )?;
        let rho = psi_n.density();
        let safe: Vec<f64> = rho.iter().map(|&r| r.max(floor)).collect();
        let lap_rho = {
            let cplx: Vec<Complex64> =
                rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            crate::geometry::laplacian(&cplx, &grid)?
        };
        let rj = rj_functionals(&psi_n, params)?;

        for i in 0..n_points {
            let row = 2 * (block * n_points + i);
            let psi_val = transformed[n][i];
            let yv = dpsi[i] / psi_val;
            y[row] = yv.re;
            y[row + 1] = yv.im;

            let mut kin_col = Complex64::new(0.0, 1.0) * kinetic_field[i] / psi_val;
            if basis == FitBasis::CurrentSquaredBlind {
                kin_col += Complex64::new(0.0, r3_to_grad_sq * rj[2][i]);
            }
            let cols: [Complex64; 8] = [
                kin_col,
                Complex64::new(0.0, 1.0),
                Complex64::new(lap_rho[i].re / safe[i], 0.0),
                Complex64::new(0.0, rj[0][i]),
                Complex64::new(0.0, rj[1][i]),
                if basis == FitBasis::CurrentSquaredBlind {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, rj[2][i])
                },
                Complex64::new(0.0, rj[3][i]),
                Complex64::new(0.0, rj[4][i]),
            ];
            for (c, col) in cols.iter().enumerate() {
                a[(row, c)] = col.re;
                a[(row + 1, c)] = col.im;
            }
        }
    }

    // In the blind basis the zeroed R₃ column would make the SVD solve
    // rank-deficient by construction; drop it from the system instead.
    let (a, active): (nalgebra::DMatrix<f64>, Vec<usize>) =
        if basis == FitBasis::CurrentSquaredBlind {
            let keep: Vec<usize> = (0..n_cols).filter(|&c| c != 5).collect();
            (a.select_columns(keep.iter()), keep)
        } else {
            (a, (0..n_cols).collect())
        };

    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let s_max = sv.iter().copied().fold(0.0f64, f64::max);
    let s_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = s_max / s_min;
    if !(s_min > 1e-12 * s_max) {
        return Err(GaugeError::IllConditioned { condition });
    }
    let x = svd
        .solve(&y, 1e-14 * s_max)
        .map_err(|_| GaugeError::IllConditioned { condition })?;
    let residual = (&a * &x - &y).norm() / y.norm().max(f64::MIN_POSITIVE);

    let mut coeffs = [0.0f64; 8];
    for (slot, &col) in active.iter().enumerate() {
        coeffs[col] = x[slot];
    }
    Ok(FitReport {
        kinetic: coeffs[0],
        v_const: coeffs[1],
        c_diffusive: coeffs[2],
        d_im: [coeffs[3], coeffs[4], coeffs[5], coeffs[6], coeffs[7]],
        residual,
        condition,
    })
}
