//! Quantum kinematics and dynamics on flat periodic manifolds.
//!
//! The crate implements the Borel-kinematic operator family — localization
//! projections `E(B)`, position operators `Q(f)` and displacement generators
//! `P(X)` labeled by a topological twist `θ` and a real parameter `c` — on
//! circles, 2-tori and periodic line segments, together with the family of
//! nonlinear Schrödinger evolutions compatible with the generalized Ehrenfest
//! relation `d/dt⟨Q(f)⟩ = ⟨P(grad f)⟩`. Spatial calculus is pseudospectral
//! (FFT) on uniform grids, so the operator-algebra checks are exact up to
//! roundoff for band-limited data.
//!
//! Module map:
//! - [`manifold`]: manifold specs, grids, quadrature weights
//! - [`trig`]: trigonometric polynomials used for observables and fields
//! - [`geometry`]: spectral differential calculus and form integration
//! - [`state`]: wavefunctions on grids, inner products, test states
//! - [`kinematics`]: E/Q/P operators, flow unitaries, residual harnesses
//! - [`classical`]: phase-space oracle (Poisson brackets, leapfrog flows)
//! - [`bundle`]: external-field admissibility (flux integrality)
//! - [`dynamics`]: nonlinear Schrödinger integration and diagnostics
//! - [`gauge`]: nonlinear gauge transformations and the linearization fit
//! - [`io`]: snapshot and diagnostics file formats

// `!(x > 0.0)` deliberately rejects NaN alongside nonpositive values, and the
// index loops walk several arrays in lockstep where iterator chains obscure
// the stencil structure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bundle;
pub mod classical;
pub mod dynamics;
pub mod gauge;
pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod manifold;
pub mod state;
pub mod trig;

pub use manifold::{Grid, ManifoldKind, ManifoldSpec};
pub use state::WaveFunction;
