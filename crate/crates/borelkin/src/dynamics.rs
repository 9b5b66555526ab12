//! Integration of the nonlinear Schrödinger family
//!
//! ```text
//! iħ ∂ψ/∂t = (−ħ²/2·Δ^ω_g + V)ψ + i(ħc/2)(Δ_g ρ/ρ)ψ + Σ_j d_j R_j[ψ]ψ
//! ```
//!
//! together with continuous verification of the density continuity equation
//! `ρ̇ + div j = cΔρ` and the Ehrenfest relation
//! `d/dt⟨Q(f)⟩ = Re⟨P(grad_g f)⟩`.
//!
//! Factor conventions. The primary current definition is
//! `j = (ħ/i)(ψ̄ grad ψ − ψ grad ψ̄) + ρ g♯ω`, whose convective part carries
//! twice the weight of the variant built with `ħ/2i`; both are available
//! through [`CurrentScale`]. The current actually conserved by the evolution
//! is `j_cons = ħ·Im(ψ̄ grad ψ) + ħt·ρ g♯ω`, with `t` the active
//! [`TwistScale`] factor of `Δ^ω`; with the default half twist this equals
//! exactly half the primary current. The continuity and Ehrenfest residuals
//! therefore use [`conserved_current`]; the factor relationships are covered
//! by tests rather than hidden.

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{
    self, laplacian, twisted_laplacian_scaled, GeometryError, TwistScale,
};
use crate::kinematics::{
    apply_p_sampled, rk4_step, KinematicsError, KinematicsParams, VectorFieldSpec,
};
use crate::manifold::{Grid, ManifoldKind};
use crate::state::{StateError, WaveFunction};
use crate::trig::TrigPoly;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("dynamics: time step must be strictly positive, got {0}")]
    BadTimeStep(f64),
    #[error("dynamics: dt = {dt} exceeds the stability bound {bound:.6e} (factor·h²·g/ħ)")]
    StabilityBound { dt: f64, bound: f64 },
    #[error("dynamics: potential has {got} samples, grid has {expected}")]
    PotentialSize { expected: usize, got: f64 },
    #[error("dynamics: density {value:.3e} below floor {floor:.3e} at flat index {index}")]
    DensityFloor { index: usize, value: f64, floor: f64 },
    #[error("dynamics: current imaginary residue {0:.3e} above tolerance (aliasing)")]
    AliasingResidue(f64),
    #[error("dynamics: exact propagation requires a constant potential")]
    NonConstantPotential,
    #[error("dynamics: snapshot window too short, need at least {need}")]
    WindowTooShort { need: usize },
    #[error("dynamics: snapshot grids or spacing do not match")]
    WindowMismatch,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Prefactor convention for the probability current.
///
/// `Double` is the primary definition `j = (ħ/i)(ψ̄∇ψ − ψ∇ψ̄) + ρ g♯ω`
/// (= `2ħ·Im(ψ̄ grad ψ) + ρ g♯ω`); `Single` uses `ħ/2i` in place of `ħ/i`,
/// halving the convective part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurrentScale {
    #[default]
    Double,
    Single,
}

impl CurrentScale {
    fn convective_factor(self, hbar: f64) -> f64 {
        match self {
            CurrentScale::Double => 2.0 * hbar,
            CurrentScale::Single => hbar,
        }
    }
}

/// Dynamics parameters. `c` and `ω` live inside [`KinematicsParams`], so the
/// representation used by Ehrenfest probes is automatically the one driving
/// the evolution.
#[derive(Debug, Clone)]
pub struct DGParams {
    pub kin: KinematicsParams,
    /// Real potential samples on the grid.
    pub potential: Vec<f64>,
    /// Coefficients of the five nonlinear functionals R₁…R₅.
    pub d_coeffs: [f64; 5],
    pub dt: f64,
    /// Absolute density floor ε regularizing the 1/ρ nonlinearities.
    pub density_floor: f64,
    /// Twist scaling inside `Δ^ω` (default: half).
    pub twist: TwistScale,
    /// Current convention used inside the R_j functionals.
    pub rj_current: CurrentScale,
    /// Multiplier in the stability bound `factor·h²·g/ħ`.
    pub stability_factor: f64,
}

impl DGParams {
    pub fn new(
        kin: KinematicsParams,
        potential: Vec<f64>,
        d_coeffs: [f64; 5],
        dt: f64,
    ) -> Result<Self, DynamicsError> {
        if !(dt > 0.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        if potential.len() != kin.grid().len() {
            return Err(DynamicsError::PotentialSize {
                expected: kin.grid().len(),
                got: potential.len() as f64,
            });
        }
        if d_coeffs.iter().any(|d| !d.is_finite()) {
            return Err(DynamicsError::BadTimeStep(f64::NAN));
        }
        Ok(Self {
            kin,
            potential,
            d_coeffs,
            dt,
            density_floor: 0.0,
            twist: TwistScale::Half,
            rj_current: CurrentScale::Double,
            stability_factor: 0.5,
        })
    }

    pub fn free(kin: KinematicsParams, dt: f64) -> Result<Self, DynamicsError> {
        let n = kin.grid().len();
        Self::new(kin, vec![0.0; n], [0.0; 5], dt)
    }

    pub fn with_density_floor(mut self, floor: f64) -> Self {
        self.density_floor = floor.max(0.0);
        self
    }

    pub fn with_twist(mut self, twist: TwistScale) -> Self {
        self.twist = twist;
        self
    }

    pub fn with_rj_current(mut self, scale: CurrentScale) -> Self {
        self.rj_current = scale;
        self
    }

    pub fn with_stability_factor(mut self, factor: f64) -> Self {
        self.stability_factor = factor;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.kin.grid()
    }

    /// Default floor relative to a reference state: `1e-12 · max ρ`.
    pub fn default_floor_for(psi: &WaveFunction) -> f64 {
        1e-12 * psi.max_density()
    }

    /// `factor·h_min²·g_min/ħ` with `h` the smallest grid spacing.
    pub fn stability_bound(&self) -> f64 {
        let grid = self.grid();
        let h = grid.min_spacing();
        let g_min =
            grid.spec().metric_diag().iter().copied().fold(f64::INFINITY, f64::min);
        self.stability_factor * h * h * g_min / self.kin.hbar()
    }

    pub fn check_stability(&self) -> Result<(), DynamicsError> {
        let bound = self.stability_bound();
        if self.dt > bound {
            return Err(DynamicsError::StabilityBound { dt: self.dt, bound });
        }
        Ok(())
    }

    pub fn is_nonlinear(&self) -> bool {
        self.kin.c() != 0.0 || self.d_coeffs.iter().any(|&d| d != 0.0)
    }
}

/// Pointwise probability density `|ψ|²`.
pub fn density(psi: &WaveFunction) -> Vec<f64> {
    psi.density()
}

/// Probability current with the requested prefactor convention:
/// `j^d = factor·Im(ψ̄ g^{dd} ∂_d ψ) + ρ g^{dd} ω_d`.
///
/// The two derivative passes (`grad ψ` and `grad ψ̄`) are taken
/// independently; their failure to be conjugate shows up as an imaginary
/// residue, which signals aliasing and is rejected above `1e-12` (relative).
pub fn current(
    psi: &WaveFunction,
    omega: &crate::geometry::OneForm,
    hbar: f64,
    scale: CurrentScale,
) -> Result<Vec<Vec<f64>>, DynamicsError> {
    let grid = psi.grid();
    if omega.grid() != grid {
        return Err(DynamicsError::Geometry(GeometryError::GridMismatch));
    }
    let conj: Vec<Complex64> = psi.data().iter().map(|v| v.conj()).collect();
    let rho = psi.density();
    let ginv = grid.spec().metric_inv();
    let factor = scale.convective_factor(hbar);
    let norm_scale = psi.max_density().max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(grid.ndim());
    for d in 0..grid.ndim() {
        let dpsi = geometry::partial(psi.data(), grid, d)?;
        let dconj = geometry::partial(&conj, grid, d)?;
        let w = &omega.components()[d];
        let mut comp = vec![0.0; grid.len()];
        let mut max_residue = 0.0f64;
        for i in 0..grid.len() {
            // (factor/2i)(ψ̄ ∂ψ − ψ ∂ψ̄): real up to the conjugation defect.
            let z = conj[i] * dpsi[i] - psi.data()[i] * dconj[i];
            max_residue = max_residue.max(z.re.abs());
            comp[i] = ginv[d] * (0.5 * factor * z.im + rho[i] * w[i]);
        }
        if max_residue > 1e-12 * norm_scale.max(1.0) {
            return Err(DynamicsError::AliasingResidue(max_residue));
        }
        out.push(comp);
    }
    Ok(out)
}

/// The current conserved by the evolution with the given twist scale:
/// `j_cons = ħ·Im(ψ̄ grad ψ) + ħt·ρ g♯ω`. With `TwistScale::Half` this is
/// exactly half of [`current`] with [`CurrentScale::Double`]; with
/// `TwistScale::Full` it matches [`CurrentScale::Single`].
pub fn conserved_current(
    psi: &WaveFunction,
    omega: &crate::geometry::OneForm,
    hbar: f64,
    twist: TwistScale,
) -> Result<Vec<Vec<f64>>, DynamicsError> {
    let grid = psi.grid();
    if omega.grid() != grid {
        return Err(DynamicsError::Geometry(GeometryError::GridMismatch));
    }
    let rho = psi.density();
    let ginv = grid.spec().metric_inv();
    let drift = hbar * twist.factor(hbar); // 1/2 or 1
    let mut out = Vec::with_capacity(grid.ndim());
    for d in 0..grid.ndim() {
        let dpsi = geometry::partial(psi.data(), grid, d)?;
        let w = &omega.components()[d];
        let comp = (0..grid.len())
            .map(|i| {
                ginv[d]
                    * (hbar * (psi.data()[i].conj() * dpsi[i]).im + drift * rho[i] * w[i])
            })
            .collect();
        out.push(comp);
    }
    Ok(out)
}

fn real_laplacian(field: &[f64], grid: &Grid) -> Result<Vec<f64>, GeometryError> {
    let cplx: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(laplacian(&cplx, grid)?.into_iter().map(|v| v.re).collect())
}

fn real_partial(field: &[f64], grid: &Grid, d: usize) -> Result<Vec<f64>, GeometryError> {
    let cplx: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(geometry::partial(&cplx, grid, d)?.into_iter().map(|v| v.re).collect())
}

fn real_divergence(vfield: &[Vec<f64>], grid: &Grid) -> Result<Vec<f64>, GeometryError> {
    let cplx: Vec<Vec<Complex64>> = vfield
        .iter()
        .map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    Ok(geometry::divergence(&cplx, grid)?.into_iter().map(|v| v.re).collect())
}

fn check_floor(rho: &[f64], floor: f64) -> Result<(), DynamicsError> {
    if floor <= 0.0 {
        return Ok(());
    }
    for (i, &r) in rho.iter().enumerate() {
        if r < floor {
            return Err(DynamicsError::DensityFloor { index: i, value: r, floor });
        }
    }
    Ok(())
}

/// The five nonlinear functionals, with every division regularized by
/// `max(ρ, ε)`:
///
/// ```text
/// R₁ = div_g j/ρ   R₂ = Δ_g ρ/ρ   R₃ = g(j,j)/ρ²
/// R₄ = dρ·j/ρ²     R₅ = dρ·grad_g ρ/ρ²
/// ```
///
/// Errors when the density dips below the floor (with the offending grid
/// location).
pub fn rj_functionals(
    psi: &WaveFunction,
    params: &DGParams,
) -> Result<[Vec<f64>; 5], DynamicsError> {
    let grid = psi.grid();
    let rho = psi.density();
    check_floor(&rho, params.density_floor)?;
    let eps = params.density_floor;
    let safe: Vec<f64> = rho.iter().map(|&r| r.max(eps)).collect();
    let j = current(psi, params.kin.omega(), params.kin.hbar(), params.rj_current)?;
    let div_j = real_divergence(&j, grid)?;
    let lap_rho = real_laplacian(&rho, grid)?;
    let drho: Vec<Vec<f64>> =
        (0..grid.ndim()).map(|d| real_partial(&rho, grid, d)).collect::<Result<_, _>>()?;
    let g = grid.spec().metric_diag();
    let ginv = grid.spec().metric_inv();

    let n = grid.len();
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    let mut r3 = vec![0.0; n];
    let mut r4 = vec![0.0; n];
    let mut r5 = vec![0.0; n];
    for i in 0..n {
        let s = safe[i];
        let s2 = s * s;
        r1[i] = div_j[i] / s;
        r2[i] = lap_rho[i] / s;
        let mut jj = 0.0;
        let mut dj = 0.0;
        let mut dd = 0.0;
        for d in 0..grid.ndim() {
            jj += g[d] * j[d][i] * j[d][i];
            dj += drho[d][i] * j[d][i];
            dd += drho[d][i] * ginv[d] * drho[d][i];
        }
        r3[i] = jj / s2;
        r4[i] = dj / s2;
        r5[i] = dd / s2;
    }
    Ok([r1, r2, r3, r4, r5])
}

/// Right-hand side `dψ/dt` of the evolution equation:
///
/// ```text
/// dψ/dt = (1/iħ)[(−ħ²/2)Δ^ω ψ + Vψ + (Σ_j d_j R_j)ψ] + (c/2)(Δρ/ρ)ψ
/// ```
pub fn rhs(psi: &WaveFunction, params: &DGParams) -> Result<Vec<Complex64>, DynamicsError> {
    let grid = psi.grid();
    let hbar = params.kin.hbar();
    let c = params.kin.c();
    let inv_ih = Complex64::new(0.0, -1.0 / hbar); // 1/(iħ)

    let kinetic = twisted_laplacian_scaled(
        psi.data(),
        params.kin.omega(),
        hbar,
        params.twist,
        grid,
    )?;

    let mut out = vec![Complex64::default(); grid.len()];
    let kin_coeff = -0.5 * hbar * hbar;
    for i in 0..grid.len() {
        out[i] = inv_ih * (kin_coeff * kinetic[i] + params.potential[i] * psi.data()[i]);
    }

    let need_c = c != 0.0;
    let need_rj = params.d_coeffs.iter().any(|&d| d != 0.0);
    if need_c || need_rj {
        let rho = psi.density();
        check_floor(&rho, params.density_floor)?;
        let safe: Vec<f64> = rho.iter().map(|&r| r.max(params.density_floor)).collect();
        if need_c {
            let lap_rho = real_laplacian(&rho, grid)?;
            for i in 0..grid.len() {
                out[i] += 0.5 * c * lap_rho[i] / safe[i] * psi.data()[i];
            }
        }
        if need_rj {
            let rj = rj_functionals(psi, params)?;
            for i in 0..grid.len() {
                let mut r_total = 0.0;
                for (dj, rji) in params.d_coeffs.iter().zip(&rj) {
                    r_total += dj * rji[i];
                }
                out[i] += inv_ih * r_total * psi.data()[i];
            }
        }
    }

    for (i, v) in out.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(DynamicsError::DensityFloor {
                index: i,
                value: f64::NAN,
                floor: params.density_floor,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Evolution driver with per-step diagnostics
// ---------------------------------------------------------------------------

/// Expectation-value probe attached to a run.
#[derive(Debug, Clone)]
pub enum ProbeKind {
    /// `⟨Q(f)⟩`; also tracked in the per-step Ehrenfest residual.
    Position(TrigPoly),
    /// `Re⟨P(X)⟩`.
    Momentum(VectorFieldSpec),
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub name: String,
    pub kind: ProbeKind,
}

/// Per-step diagnostics. `fp_residual` couples steps `n−1, n`; the Ehrenfest
/// entries are centered one step back (both are 0 until enough history
/// exists).
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub norm: f64,
    pub min_rho: f64,
    pub ehrenfest_max: f64,
    pub fp_residual: f64,
    /// Mass fraction in the outer 10% of the domain; tracked on the periodic
    /// line segment, 0 on closed manifolds.
    pub boundary_mass: f64,
    pub q_expect: Vec<f64>,
    pub p_expect: Vec<f64>,
    pub ehrenfest: Vec<f64>,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    DensityFloorViolation { step: usize, index: usize, value: f64 },
    NonFinite { step: usize },
    NormBlowup { step: usize, norm: f64 },
}

#[derive(Debug, Clone)]
pub struct EvolveOutput {
    /// `(time, state)` pairs at the snapshot cadence (always includes the
    /// initial state; includes the final state when the run completes).
    pub snapshots: Vec<(f64, WaveFunction)>,
    pub records: Vec<DiagnosticsRecord>,
    pub status: RunStatus,
}

impl EvolveOutput {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn final_state(&self) -> &WaveFunction {
        &self.snapshots.last().expect("at least the initial snapshot").1
    }
}

struct ProbeContext {
    f_samples: Vec<f64>,
    grad_components: Vec<Vec<f64>>,
}

/// Evolve `ψ₀` to `t_final` with the 4th-order one-step scheme in spectral
/// space, appending one [`DiagnosticsRecord`] per step and storing snapshots
/// every `snapshot_every` steps. Density-floor violations (nonlinear runs),
/// non-finite samples, and norm blow-up beyond 10× the initial norm abort
/// the run with partial diagnostics preserved in the output.
pub fn evolve(
    psi0: &WaveFunction,
    params: &DGParams,
    t_final: f64,
    probes: &[Probe],
    snapshot_every: usize,
) -> Result<EvolveOutput, DynamicsError> {
    params.check_stability()?;
    let grid = psi0.grid();
    if grid != params.grid() {
        return Err(DynamicsError::Geometry(GeometryError::GridMismatch));
    }
    let n_steps = (t_final / params.dt).round() as usize;
    let cadence = snapshot_every.max(1);
    let track_boundary = grid.kind() == ManifoldKind::LineSegment;

    // Precompute probe samples and (for position probes) grad_g f.
    let contexts: Vec<(usize, ProbeContext)> = probes
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match &p.kind {
            ProbeKind::Position(f) => {
                let f_samples = grid.sample(|x| f.eval(x));
                let ginv = grid.spec().metric_inv();
                let grad_components = (0..grid.ndim())
                    .map(|d| {
                        let df = f.partial(d);
                        grid.sample(|x| ginv[d] * df.eval(x))
                    })
                    .collect();
                Some((i, ProbeContext { f_samples, grad_components }))
            }
            ProbeKind::Momentum(_) => None,
        })
        .collect();
    let momentum_samples: Vec<(usize, Vec<Vec<f64>>)> = probes
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match &p.kind {
            ProbeKind::Momentum(x) => Some((i, x.sample(grid))),
            ProbeKind::Position(_) => None,
        })
        .collect();

    let rhs_fn = |state: &WaveFunction| rhs(state, params);

    let mut snapshots = Vec::new();
    let mut records: Vec<DiagnosticsRecord> = Vec::with_capacity(n_steps + 1);
    let mut status = RunStatus::Completed;
    let norm0 = psi0.norm();
    let floor_active = params.is_nonlinear();

    // Rolling history for the centered Ehrenfest difference.
    let mut q_hist: Vec<Vec<f64>> = Vec::new(); // per step: per position-probe ⟨Q⟩
    let mut pgrad_hist: Vec<Vec<f64>> = Vec::new(); // per step: Re⟨P(grad f)⟩
    let mut prev_state: Option<WaveFunction> = None;

    let mut state = psi0.clone();
    snapshots.push((0.0, state.clone()));

    for step in 0..=n_steps {
        let time = step as f64 * params.dt;
        let rho = state.density();
        let min_rho = rho.iter().copied().fold(f64::INFINITY, f64::min);
        let norm = state.norm();

        // Expectations.
        let mut q_expect = vec![0.0; probes.len()];
        let mut p_expect = vec![0.0; probes.len()];
        let mut q_now = Vec::with_capacity(contexts.len());
        let mut pgrad_now = Vec::with_capacity(contexts.len());
        for (slot, ctx) in &contexts {
            let q: f64 = ctx
                .f_samples
                .iter()
                .zip(&rho)
                .map(|(&f, &r)| f * r)
                .sum::<f64>()
                * grid.cell_volume();
            q_expect[*slot] = q;
            q_now.push(q);
            let pgf = apply_p_sampled(&ctx.grad_components, &state, &params.kin)?;
            pgrad_now.push(state.inner(&pgf)?.re);
        }
        for (slot, comps) in &momentum_samples {
            let px = apply_p_sampled(comps, &state, &params.kin)?;
            p_expect[*slot] = state.inner(&px)?.re;
        }
        q_hist.push(q_now);
        pgrad_hist.push(pgrad_now);

        // Continuity residual between the previous and current step.
        let fp_residual = match &prev_state {
            Some(prev) => fokker_planck_residual(prev, &state, params.dt, params)?,
            None => 0.0,
        };

        // Ehrenfest residual centered at step−1.
        let mut ehrenfest = vec![0.0; contexts.len()];
        let mut ehrenfest_max = 0.0f64;
        if step >= 2 {
            let n = q_hist.len();
            for k in 0..contexts.len() {
                let qdot = (q_hist[n - 1][k] - q_hist[n - 3][k]) / (2.0 * params.dt);
                let resid = (qdot - pgrad_hist[n - 2][k]).abs();
                ehrenfest[k] = resid;
                ehrenfest_max = ehrenfest_max.max(resid);
            }
        }

        records.push(DiagnosticsRecord {
            time,
            norm,
            min_rho,
            ehrenfest_max,
            fp_residual,
            boundary_mass: if track_boundary { state.boundary_mass() } else { 0.0 },
            q_expect,
            p_expect,
            ehrenfest,
        });

        if step == n_steps {
            if !n_steps.is_multiple_of(cadence) {
                snapshots.push((time, state.clone()));
            }
            break;
        }

        // Abort checks before stepping further.
        if floor_active && params.density_floor > 0.0 && min_rho < params.density_floor {
            let index = rho
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            status = RunStatus::DensityFloorViolation { step, index, value: min_rho };
            break;
        }
        if !norm.is_finite() {
            status = RunStatus::NonFinite { step };
            break;
        }
        if norm > 10.0 * norm0 {
            status = RunStatus::NormBlowup { step, norm };
            break;
        }

        prev_state = Some(state.clone());
        state = match rk4_step(&state, params.dt, &rhs_fn) {
            Ok(next) => next,
            Err(DynamicsError::DensityFloor { index, value, .. }) => {
                status = RunStatus::DensityFloorViolation { step, index, value };
                break;
            }
            Err(other) => return Err(other),
        };
        if state.data().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            status = RunStatus::NonFinite { step: step + 1 };
            break;
        }
        if (step + 1).is_multiple_of(cadence) {
            snapshots.push(((step + 1) as f64 * params.dt, state.clone()));
        }
    }

    Ok(EvolveOutput { snapshots, records, status })
}

/// Exact propagation of the **linear** equation (all nonlinear coefficients
/// zero) with constant potential, by applying the spectral eigenphases
/// `exp(−(i/ħ)(ħ²/2·λ_k + V₀)·t)` mode by mode. Used as the linear-limit
/// oracle and to synthesize analytic trajectories.
pub fn propagate_linear_exact(
    psi0: &WaveFunction,
    params: &DGParams,
    times: &[f64],
) -> Result<Vec<WaveFunction>, DynamicsError> {
    let grid = psi0.grid();
    let v0 = params.potential[0];
    if params.potential.iter().any(|&v| (v - v0).abs() > 1e-13 * (1.0 + v0.abs())) {
        return Err(DynamicsError::NonConstantPotential);
    }
    if !params.kin.omega().is_constant() {
        return Err(DynamicsError::NonConstantPotential);
    }
    let hbar = params.kin.hbar();
    let t_factor = params.twist.factor(hbar);
    let shift: Vec<f64> =
        params.kin.omega().constant_part().iter().map(|w| w * t_factor).collect();
    let ginv = grid.spec().metric_inv();

    let mut hat0 = psi0.data().to_vec();
    crate::geometry::fft_forward(&mut hat0, grid.shape());
    let tables: Vec<Vec<f64>> =
        (0..grid.ndim()).map(|d| crate::geometry::wavenumbers(grid, d)).collect();
    let mut eigen = vec![0.0; grid.len()];
    for (flat, ev) in eigen.iter_mut().enumerate() {
        let idx = grid.multi_index(flat);
        let mut lam = 0.0;
        for (d, &i) in idx.iter().enumerate() {
            let q = tables[d][i] + shift[d];
            lam += ginv[d] * q * q;
        }
        // Full mode energy (ħ²/2)·λ + V₀.
        *ev = 0.5 * hbar * hbar * lam + v0;
    }

    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut hat = hat0.clone();
        for (h, &ev) in hat.iter_mut().zip(&eigen) {
            *h *= Complex64::new(0.0, -ev * t / hbar).exp();
        }
        crate::geometry::fft_inverse(&mut hat, grid.shape());
        out.push(WaveFunction::new(grid.clone(), hat)?);
    }
    Ok(out)
}

/// Continuity residual between two consecutive snapshots:
/// `‖(ρ_b − ρ_a)/dt + div_g j_{mid} − c Δ_g ρ_{mid}‖₂` with the midpoint
/// fields obtained by averaging and `j` the conserved current of the active
/// twist convention.
pub fn fokker_planck_residual(
    a: &WaveFunction,
    b: &WaveFunction,
    dt: f64,
    params: &DGParams,
) -> Result<f64, DynamicsError> {
    let grid = a.grid();
    if b.grid() != grid {
        return Err(DynamicsError::WindowMismatch);
    }
    let rho_a = a.density();
    let rho_b = b.density();
    let ja = conserved_current(a, params.kin.omega(), params.kin.hbar(), params.twist)?;
    let jb = conserved_current(b, params.kin.omega(), params.kin.hbar(), params.twist)?;
    let j_mid: Vec<Vec<f64>> = ja
        .iter()
        .zip(&jb)
        .map(|(ca, cb)| ca.iter().zip(cb).map(|(&x, &y)| 0.5 * (x + y)).collect())
        .collect();
    let div_j = real_divergence(&j_mid, grid)?;
    let rho_mid: Vec<f64> =
        rho_a.iter().zip(&rho_b).map(|(&x, &y)| 0.5 * (x + y)).collect();
    let lap_mid = real_laplacian(&rho_mid, grid)?;
    let c = params.kin.c();
    let mut sum = 0.0;
    for i in 0..grid.len() {
        let r = (rho_b[i] - rho_a[i]) / dt + div_j[i] - c * lap_mid[i];
        sum += r * r;
    }
    Ok((sum * grid.cell_volume()).sqrt())
}

/// Ehrenfest residual over a uniformly spaced snapshot window:
/// max over interior snapshots of
/// `|d/dt⟨Q(f)⟩ − Re⟨ψ|P(grad_g f)ψ⟩|` with the time derivative by central
/// differences. `P` uses the same `(c, ω)` as the dynamics.
pub fn ehrenfest_residual(
    f: &TrigPoly,
    window: &[WaveFunction],
    dt: f64,
    params: &DGParams,
) -> Result<f64, DynamicsError> {
    if window.len() < 3 {
        return Err(DynamicsError::WindowTooShort { need: 3 });
    }
    let grid = window[0].grid();
    for w in window {
        if w.grid() != grid {
            return Err(DynamicsError::WindowMismatch);
        }
    }
    let f_samples = grid.sample(|x| f.eval(x));
    let ginv = grid.spec().metric_inv();
    let grad_components: Vec<Vec<f64>> = (0..grid.ndim())
        .map(|d| {
            let df = f.partial(d);
            grid.sample(|x| ginv[d] * df.eval(x))
        })
        .collect();
    let q_of = |psi: &WaveFunction| -> f64 {
        psi.density()
            .iter()
            .zip(&f_samples)
            .map(|(&r, &fv)| r * fv)
            .sum::<f64>()
            * grid.cell_volume()
    };
    let mut max = 0.0f64;
    for n in 1..window.len() - 1 {
        let qdot = (q_of(&window[n + 1]) - q_of(&window[n - 1])) / (2.0 * dt);
        let pgf = apply_p_sampled(&grad_components, &window[n], &params.kin)?;
        let rhs_val = window[n].inner(&pgf)?.re;
        max = max.max((qdot - rhs_val).abs());
    }
    Ok(max)
}
