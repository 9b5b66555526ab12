//! Borel-kinematic operators on the grid: localization projections `E(B)`,
//! multiplication operators `Q(f)`, displacement generators `P(X)`, flow
//! unitaries, and the residual harnesses used to verify the algebra.
//!
//! The representation is labeled by `(θ, c)`: a closed one-form `ω` whose
//! constant part realizes the character-group twist θ, and a real parameter
//! `c` entering the divergence term of `P(X)`:
//!
//! ```text
//! P(X)ψ = (ħ/i)·X^d ∂_d ψ + ω(X)·ψ + (c + ħ/2i)·(div X)·ψ
//! ```
//!
//! All applications are matrix-free; spectra are evaluated on the plane-wave
//! basis rather than by dense diagonalization.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{self, GeometryError, OneForm, TwoForm};
use crate::manifold::{Grid, ManifoldKind};
use crate::state::{StateError, WaveFunction};
use crate::trig::TrigPoly;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("kinematics: hbar must be strictly positive, got {0}")]
    NonPositiveHbar(f64),
    #[error("kinematics: the one-form labeling the representation must be closed")]
    OmegaNotClosed,
    #[error("kinematics: trigonometric degree {degree} exceeds the aliasing bound {max}")]
    DegreeOverflow { degree: u32, max: u32 },
    #[error("kinematics: interval endpoint {0} is not grid-aligned (spacing {1})")]
    NotAligned(f64, f64),
    #[error("kinematics: displacement {0} is not a grid multiple (spacing {1})")]
    DisplacementNotAligned(f64, f64),
    #[error("kinematics: interval ({0}, {1}) is not within [0, {2})")]
    IntervalRange(f64, f64, f64),
    #[error("kinematics: operation unsupported on {0:?}")]
    UnsupportedManifold(ManifoldKind),
    #[error("kinematics: grids do not match")]
    GridMismatch,
    #[error("kinematics: numeric flow norm drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    FlowDrift { drift: f64, tol: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    State(#[from] StateError),
}

// ---------------------------------------------------------------------------
// Representation labels
// ---------------------------------------------------------------------------

/// Classification data of one representation: `ħ`, the real parameter `c`
/// and the closed one-form `ω` (constant part = topological twist θ).
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsParams {
    hbar: f64,
    c: f64,
    omega: OneForm,
}

impl KinematicsParams {
    pub fn new(hbar: f64, c: f64, omega: OneForm) -> Result<Self, KinematicsError> {
        if !(hbar > 0.0) {
            return Err(KinematicsError::NonPositiveHbar(hbar));
        }
        if !omega.is_closed() {
            return Err(KinematicsError::OmegaNotClosed);
        }
        Ok(Self { hbar, c, omega })
    }

    /// Untwisted representation (ω = 0).
    pub fn untwisted(grid: &Grid, hbar: f64, c: f64) -> Result<Self, KinematicsError> {
        Self::new(hbar, c, OneForm::zero(grid))
    }

    /// Representation with constant twist θ along each axis.
    pub fn twisted(grid: &Grid, hbar: f64, c: f64, theta: &[f64]) -> Result<Self, KinematicsError> {
        Self::new(hbar, c, OneForm::constant(grid, theta))
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn omega(&self) -> &OneForm {
        &self.omega
    }

    pub fn grid(&self) -> &Grid {
        self.omega.grid()
    }

    /// Constant (harmonic) part of ω — the twist θ.
    pub fn theta(&self) -> &[f64] {
        self.omega.constant_part()
    }

    /// Spacing of the equivalence lattice along axis `d`: twists differing by
    /// `2πħ/L_d` label unitarily equivalent representations.
    pub fn theta_lattice(&self, d: usize) -> f64 {
        std::f64::consts::TAU * self.hbar / self.grid().spec().extents()[d]
    }

    /// θ reduced into the fundamental cell `[0, 2πħ/L_d)` per axis.
    pub fn theta_reduced(&self) -> Vec<f64> {
        self.theta()
            .iter()
            .enumerate()
            .map(|(d, &t)| t.rem_euclid(self.theta_lattice(d)))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Borel sets
// ---------------------------------------------------------------------------

/// Product of per-dimension unions of half-open intervals `[a, b)`, with
/// endpoints on grid points. Intervals are sorted and merged at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BorelSet {
    extents: Vec<f64>,
    intervals: Vec<Vec<(f64, f64)>>,
}

impl BorelSet {
    pub fn new(
        extents: &[f64],
        intervals: Vec<Vec<(f64, f64)>>,
    ) -> Result<Self, KinematicsError> {
        assert_eq!(intervals.len(), extents.len());
        let mut normalized = Vec::with_capacity(intervals.len());
        for (d, mut ivs) in intervals.into_iter().enumerate() {
            let l = extents[d];
            for &(a, b) in &ivs {
                if !(0.0 <= a && a < b && b <= l) {
                    return Err(KinematicsError::IntervalRange(a, b, l));
                }
            }
            ivs.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
            for (a, b) in ivs {
                match merged.last_mut() {
                    Some(last) if a <= last.1 => last.1 = last.1.max(b),
                    _ => merged.push((a, b)),
                }
            }
            normalized.push(merged);
        }
        Ok(Self { extents: extents.to_vec(), intervals: normalized })
    }

    /// The whole manifold.
    pub fn full(extents: &[f64]) -> Self {
        let intervals = extents.iter().map(|&l| vec![(0.0, l)]).collect();
        Self { extents: extents.to_vec(), intervals }
    }

    /// The empty set.
    pub fn empty(extents: &[f64]) -> Self {
        let intervals = extents.iter().map(|_| Vec::new()).collect();
        Self { extents: extents.to_vec(), intervals }
    }

    pub fn intervals(&self) -> &[Vec<(f64, f64)>] {
        &self.intervals
    }

    /// Image of the set under the translation `x ↦ x + delta` (with wrap).
    pub fn displaced(&self, delta: &[f64]) -> BorelSet {
        assert_eq!(delta.len(), self.extents.len());
        let mut intervals = Vec::with_capacity(self.intervals.len());
        for (d, ivs) in self.intervals.iter().enumerate() {
            let l = self.extents[d];
            let mut shifted = Vec::with_capacity(ivs.len() + 1);
            for &(a, b) in ivs {
                if b - a >= l {
                    shifted.push((0.0, l));
                    continue;
                }
                let a2 = (a + delta[d]).rem_euclid(l);
                let mut b2 = (b + delta[d]).rem_euclid(l);
                if b2 == 0.0 {
                    b2 = l;
                }
                if a2 < b2 {
                    shifted.push((a2, b2));
                } else {
                    shifted.push((0.0, b2));
                    shifted.push((a2, l));
                }
            }
            intervals.push(shifted);
        }
        BorelSet::new(&self.extents, intervals).expect("displacement preserves validity")
    }

    /// Per-point membership as 0/1 samples. Errors when an endpoint does not
    /// sit on a grid point.
    pub fn indicator(&self, grid: &Grid) -> Result<Vec<f64>, KinematicsError> {
        if self.extents != grid.spec().extents() {
            return Err(KinematicsError::GridMismatch);
        }
        // Convert endpoints to integer indices, insisting on alignment.
        let mut index_ranges: Vec<Vec<(usize, usize)>> = Vec::with_capacity(self.intervals.len());
        for (d, ivs) in self.intervals.iter().enumerate() {
            let h = grid.spacing(d);
            let mut ranges = Vec::with_capacity(ivs.len());
            for &(a, b) in ivs {
                let ia = a / h;
                let ib = b / h;
                if (ia - ia.round()).abs() > 1e-9 {
                    return Err(KinematicsError::NotAligned(a, h));
                }
                if (ib - ib.round()).abs() > 1e-9 {
                    return Err(KinematicsError::NotAligned(b, h));
                }
                ranges.push((ia.round() as usize, ib.round() as usize));
            }
            index_ranges.push(ranges);
        }
        let mut out = vec![0.0; grid.len()];
        for (flat, v) in out.iter_mut().enumerate() {
            let idx = grid.multi_index(flat);
            let inside = idx.iter().enumerate().all(|(d, &i)| {
                index_ranges[d].iter().any(|&(ia, ib)| ia <= i && i < ib)
            });
            if inside {
                *v = 1.0;
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

/// Smooth vector field with trigonometric-polynomial components. Complete by
/// construction on the compact manifolds handled here.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    components: Vec<TrigPoly>,
}

impl VectorFieldSpec {
    pub fn new(components: Vec<TrigPoly>) -> Self {
        assert!(!components.is_empty());
        let ext = components[0].extents().to_vec();
        for c in &components {
            assert_eq!(c.extents(), ext.as_slice(), "component extents must agree");
        }
        assert_eq!(components.len(), ext.len(), "one component per dimension");
        Self { components }
    }

    /// Constant vector field.
    pub fn constant(extents: &[f64], v: &[f64]) -> Self {
        assert_eq!(v.len(), extents.len());
        Self::new(v.iter().map(|&vi| TrigPoly::constant(extents, vi)).collect())
    }

    /// The coordinate frame field `∂_d`.
    pub fn axis(extents: &[f64], d: usize) -> Self {
        let mut v = vec![0.0; extents.len()];
        v[d] = 1.0;
        Self::constant(extents, &v)
    }

    pub fn zero(extents: &[f64]) -> Self {
        Self::constant(extents, &vec![0.0; extents.len()])
    }

    pub fn components(&self) -> &[TrigPoly] {
        &self.components
    }

    pub fn ndim(&self) -> usize {
        self.components.len()
    }

    pub fn extents(&self) -> &[f64] {
        self.components[0].extents()
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.components.iter().all(|c| c.is_constant())
    }

    /// Value of each (constant) component; `None` when non-constant.
    pub fn constant_value(&self) -> Option<Vec<f64>> {
        if !self.is_constant() {
            return None;
        }
        let origin = vec![0.0; self.ndim()];
        Some(self.components.iter().map(|c| c.eval(&origin)).collect())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Component samples over the grid.
    pub fn sample(&self, grid: &Grid) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| grid.sample(|x| c.eval(x))).collect()
    }

    /// `X + α·Y` as a spec (exact term concatenation).
    pub fn plus_scaled(&self, other: &VectorFieldSpec, alpha: f64) -> VectorFieldSpec {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.plus(&b.scaled(alpha)))
            .collect();
        VectorFieldSpec { components }
    }

    /// Lie bracket `[X, Y]^d = X^a ∂_a Y^d − Y^a ∂_a X^d`, sampled on the
    /// grid using the exact partials of the trigonometric components.
    pub fn lie_bracket_samples(&self, other: &VectorFieldSpec, grid: &Grid) -> Vec<Vec<f64>> {
        let ndim = self.ndim();
        let xs = self.sample(grid);
        let ys = other.sample(grid);
        let mut out = Vec::with_capacity(ndim);
        for d in 0..ndim {
            let mut comp = vec![0.0; grid.len()];
            for a in 0..ndim {
                let dyd = other.components[d].partial(a);
                let dxd = self.components[d].partial(a);
                let dyd_s = grid.sample(|x| dyd.eval(x));
                let dxd_s = grid.sample(|x| dxd.eval(x));
                for i in 0..grid.len() {
                    comp[i] += xs[a][i] * dyd_s[i] - ys[a][i] * dxd_s[i];
                }
            }
            out.push(comp);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Operator applications
// ---------------------------------------------------------------------------

/// Localization projection: pointwise multiplication by the indicator of `B`.
pub fn apply_e(b: &BorelSet, psi: &WaveFunction) -> Result<WaveFunction, KinematicsError> {
    let chi = b.indicator(psi.grid())?;
    let data = psi.data().iter().zip(&chi).map(|(v, &c)| v * c).collect();
    Ok(WaveFunction::from_raw(psi.grid().clone(), data))
}

/// Position-type operator: pointwise multiplication by real samples `f`.
pub fn apply_q(f: &[f64], psi: &WaveFunction) -> Result<WaveFunction, KinematicsError> {
    if f.len() != psi.grid().len() {
        return Err(KinematicsError::Geometry(GeometryError::FieldSize {
            expected: psi.grid().len(),
            got: f.len(),
        }));
    }
    let data = psi.data().iter().zip(f).map(|(v, &c)| v * c).collect();
    Ok(WaveFunction::from_raw(psi.grid().clone(), data))
}

/// `Q(f)` for a trigonometric observable.
pub fn apply_q_poly(f: &TrigPoly, psi: &WaveFunction) -> Result<WaveFunction, KinematicsError> {
    let samples = psi.grid().sample(|x| f.eval(x));
    apply_q(&samples, psi)
}

/// Displacement generator applied to sampled vector-field components, with an
/// optional extra one-form added to ω (used by the magnetic harness, where
/// the extra potential need not be closed).
fn apply_p_impl(
    components: &[Vec<f64>],
    psi: &WaveFunction,
    params: &KinematicsParams,
    extra_potential: Option<&OneForm>,
) -> Result<WaveFunction, KinematicsError> {
    let grid = psi.grid();
    if grid != params.grid() {
        return Err(KinematicsError::GridMismatch);
    }
    let hbar = params.hbar;
    let h_over_i = Complex64::new(0.0, -hbar);
    let mut out = vec![Complex64::default(); grid.len()];

    // (ħ/i) X^d ∂_d ψ
    for (d, comp) in components.iter().enumerate() {
        let dpsi = geometry::partial(psi.data(), grid, d)?;
        for ((o, &xd), dp) in out.iter_mut().zip(comp).zip(dpsi) {
            *o += h_over_i * xd * dp;
        }
    }

    // ω(X) ψ  (+ A(X) ψ when an extra potential is supplied)
    let mut pairing = params.omega.contract(components)?;
    if let Some(a) = extra_potential {
        let extra = a.contract(components)?;
        for (p, e) in pairing.iter_mut().zip(extra) {
            *p += e;
        }
    }
    for ((o, &w), v) in out.iter_mut().zip(&pairing).zip(psi.data()) {
        *o += w * v;
    }

    // (c + ħ/2i) div X ψ; the spectral divergence of exactly constant
    // samples is exactly zero, so this term vanishes bitwise for
    // divergence-free fields regardless of c.
    let cplx: Vec<Vec<Complex64>> = components
        .iter()
        .map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    let div = geometry::divergence(&cplx, grid)?;
    let coeff = Complex64::new(params.c, -0.5 * hbar);
    for ((o, dv), v) in out.iter_mut().zip(div).zip(psi.data()) {
        *o += coeff * dv * v;
    }

    Ok(WaveFunction::from_raw(grid.clone(), out))
}

/// `P(X)ψ` for a trigonometric vector field. Rejects fields whose degree
/// risks aliasing (per-axis bound N/4).
pub fn apply_p(
    x: &VectorFieldSpec,
    psi: &WaveFunction,
    params: &KinematicsParams,
) -> Result<WaveFunction, KinematicsError> {
    let grid = psi.grid();
    let max = (grid.shape().iter().copied().min().unwrap_or(4) / 4) as u32;
    if x.degree() > max {
        return Err(KinematicsError::DegreeOverflow { degree: x.degree(), max });
    }
    apply_p_impl(&x.sample(grid), psi, params, None)
}

/// `P(X)ψ` for component samples (no degree screening; callers own the
/// band-limit bookkeeping).
pub fn apply_p_sampled(
    components: &[Vec<f64>],
    psi: &WaveFunction,
    params: &KinematicsParams,
) -> Result<WaveFunction, KinematicsError> {
    apply_p_impl(components, psi, params, None)
}

// ---------------------------------------------------------------------------
// Flow unitaries
// ---------------------------------------------------------------------------

/// Options for the numeric flow path.
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Substeps per unit of the estimated generator scale.
    pub substep_scale: f64,
    /// Relative norm-drift tolerance; exceeding it is reported as an error.
    pub drift_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { substep_scale: 0.1, drift_tol: 1e-6 }
    }
}

/// One-parameter displacement unitary `V_s = exp(−(i/ħ) s P(X))`, oriented so
/// that states move forward along the flow of `X` and
/// `V_s E(B) V_{−s} = E(Φ_s B)` holds with `Φ_s` the forward flow.
///
/// Constant `X` with constant ω takes an exact path: a pure sample rotation
/// when `s·X` is a grid multiple, otherwise a frequency-space phase shift
/// (exact for band-limited states). Everything else integrates
/// `dψ/ds = −(i/ħ) P(X) ψ` with a fixed-step 4th-order scheme.
pub fn flow_unitary(
    x: &VectorFieldSpec,
    s: f64,
    psi: &WaveFunction,
    params: &KinematicsParams,
) -> Result<WaveFunction, KinematicsError> {
    flow_unitary_with(x, s, psi, params, FlowOptions::default())
}

pub fn flow_unitary_with(
    x: &VectorFieldSpec,
    s: f64,
    psi: &WaveFunction,
    params: &KinematicsParams,
    opts: FlowOptions,
) -> Result<WaveFunction, KinematicsError> {
    let grid = psi.grid();
    if grid != params.grid() {
        return Err(KinematicsError::GridMismatch);
    }
    if s == 0.0 {
        return Ok(psi.clone());
    }
    if let (Some(v), true) = (x.constant_value(), params.omega.is_constant()) {
        let theta = params.omega.constant_part();
        let phase_const: f64 =
            -s / params.hbar * theta.iter().zip(&v).map(|(&t, &vi)| t * vi).sum::<f64>();
        let shifts: Vec<f64> = v.iter().map(|&vi| s * vi).collect();

        // Grid-multiple displacement: exact permutation of samples.
        let grid_steps: Option<Vec<i64>> = shifts
            .iter()
            .enumerate()
            .map(|(d, &delta)| {
                let steps = delta / grid.spacing(d);
                ((steps - steps.round()).abs() < 1e-9).then_some(steps.round() as i64)
            })
            .collect();
        if let Some(steps) = grid_steps {
            let phase = Complex64::new(0.0, phase_const).exp();
            let shape = grid.shape();
            let mut data = vec![Complex64::default(); grid.len()];
            for (flat, slot) in data.iter_mut().enumerate() {
                let idx = grid.multi_index(flat);
                let mut src = 0usize;
                for (d, &i) in idx.iter().enumerate() {
                    let n = shape[d] as i64;
                    let j = (i as i64 - steps[d]).rem_euclid(n) as usize;
                    src = src * shape[d] + j;
                }
                *slot = psi.data()[src] * phase;
            }
            return Ok(WaveFunction::from_raw(grid.clone(), data));
        }

        // General constant displacement: frequency-space phase shift.
        let mut hat = psi.data().to_vec();
        crate::geometry::fft_forward(&mut hat, grid.shape());
        let tables: Vec<Vec<f64>> =
            (0..grid.ndim()).map(|d| crate::geometry::wavenumbers(grid, d)).collect();
        for (flat, w) in hat.iter_mut().enumerate() {
            let idx = grid.multi_index(flat);
            let karg: f64 = idx.iter().enumerate().map(|(d, &i)| tables[d][i] * shifts[d]).sum();
            *w *= Complex64::new(0.0, -karg + phase_const).exp();
        }
        crate::geometry::fft_inverse(&mut hat, grid.shape());
        return Ok(WaveFunction::from_raw(grid.clone(), hat));
    }

    // Numeric path.
    let components = x.sample(grid);
    let sup_x = components
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let k_nyq: f64 = (0..grid.ndim())
        .map(|d| std::f64::consts::PI / grid.spacing(d))
        .fold(0.0, f64::max);
    let rate = params.hbar * sup_x * k_nyq + 1.0;
    let n_steps = ((s.abs() * rate / opts.substep_scale).ceil() as usize).max(1);
    let ds = s / n_steps as f64;
    let factor = Complex64::new(0.0, -1.0 / params.hbar);
    let rhs = |state: &WaveFunction| -> Result<Vec<Complex64>, KinematicsError> {
        let p = apply_p_impl(&components, state, params, None)?;
        Ok(p.data().iter().map(|v| factor * v).collect())
    };
    let mut state = psi.clone();
    for _ in 0..n_steps {
        state = rk4_step(&state, ds, &rhs)?;
    }
    let drift = (state.norm() - psi.norm()).abs() / psi.norm();
    if drift > opts.drift_tol {
        return Err(KinematicsError::FlowDrift { drift, tol: opts.drift_tol });
    }
    Ok(state)
}

pub(crate) fn rk4_step<E>(
    psi: &WaveFunction,
    dt: f64,
    rhs: &impl Fn(&WaveFunction) -> Result<Vec<Complex64>, E>,
) -> Result<WaveFunction, E> {
    let grid = psi.grid().clone();
    let stage = |base: &WaveFunction, k: &[Complex64], h: f64| {
        let data = base.data().iter().zip(k).map(|(v, kv)| v + kv * h).collect::<Vec<_>>();
        WaveFunction::from_raw(grid.clone(), data)
    };
    let k1 = rhs(psi)?;
    let k2 = rhs(&stage(psi, &k1, dt / 2.0))?;
    let k3 = rhs(&stage(psi, &k2, dt / 2.0))?;
    let k4 = rhs(&stage(psi, &k3, dt))?;
    let data = psi
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| v + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0))
        .collect();
    Ok(WaveFunction::from_raw(grid, data))
}

// ---------------------------------------------------------------------------
// Residual harnesses
// ---------------------------------------------------------------------------

/// Which commutation relation to probe.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)] // built once per harness call, never stored in bulk
pub enum CommutatorKind {
    /// `[Q(f), Q(g)] = 0`
    QQ { f: TrigPoly, g: TrigPoly },
    /// `[P(X), Q(f)] = (ħ/i) Q(L_X f)`
    PQ { x: VectorFieldSpec, f: TrigPoly },
    /// `[P(X), P(Y)] = (ħ/i) P([X, Y])`
    PP { x: VectorFieldSpec, y: VectorFieldSpec },
    /// With an external potential `A` (dA = e·φ):
    /// `[P_A(X), P_A(Y)] = (ħ/i)(P_A([X,Y]) + e·Q(φ(X,Y)))`
    PPMagnetic {
        x: VectorFieldSpec,
        y: VectorFieldSpec,
        potential: OneForm,
        e: f64,
        phi: TwoForm,
    },
}

/// Options for the residual harnesses: number of random band-limited test
/// states, their band, and the RNG seed (results are deterministic given the
/// seed).
#[derive(Debug, Clone, Copy)]
pub struct HarnessOptions {
    pub n_vectors: usize,
    pub max_mode: usize,
    pub seed: u64,
}

impl HarnessOptions {
    pub fn for_grid(grid: &Grid) -> Self {
        let n_min = grid.shape().iter().copied().min().unwrap_or(8);
        Self { n_vectors: 6, max_mode: (n_min / 8).max(1), seed: 0x5eed }
    }
}

pub fn test_vectors(
    grid: &Grid,
    opts: &HarnessOptions,
) -> Result<Vec<WaveFunction>, KinematicsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.n_vectors)
        .map(|_| Ok(WaveFunction::random_band_limited(grid, opts.max_mode, &mut rng)?))
        .collect()
}

fn check_degree(degree: u32, grid: &Grid) -> Result<(), KinematicsError> {
    let max = (grid.shape().iter().copied().min().unwrap_or(8) / 8) as u32;
    if degree > max {
        return Err(KinematicsError::DegreeOverflow { degree, max });
    }
    Ok(())
}

fn sup_relative_residual(
    psis: &[WaveFunction],
    mut lhs_minus_rhs: impl FnMut(&WaveFunction) -> Result<f64, KinematicsError>,
) -> Result<f64, KinematicsError> {
    let mut sup = 0.0f64;
    for psi in psis {
        sup = sup.max(lhs_minus_rhs(psi)? / psi.norm());
    }
    Ok(sup)
}

/// Sup over a fixed random test-vector set of `‖(LHS − RHS)ψ‖ / ‖ψ‖` for the
/// requested commutation relation.
pub fn commutator_residual(
    kind: &CommutatorKind,
    params: &KinematicsParams,
    opts: &HarnessOptions,
) -> Result<f64, KinematicsError> {
    let grid = params.grid();
    let psis = test_vectors(grid, opts)?;
    match kind {
        CommutatorKind::QQ { f, g } => {
            check_degree(f.degree().max(g.degree()), grid)?;
            let fs = grid.sample(|x| f.eval(x));
            let gs = grid.sample(|x| g.eval(x));
            sup_relative_residual(&psis, |psi| {
                let fg = apply_q(&fs, &apply_q(&gs, psi)?)?;
                let gf = apply_q(&gs, &apply_q(&fs, psi)?)?;
                Ok(fg.l2_distance(&gf)?)
            })
        }
        CommutatorKind::PQ { x, f } => {
            check_degree(x.degree().max(f.degree()), grid)?;
            let fs = grid.sample(|xp| f.eval(xp));
            let xs = x.sample(grid);
            // L_X f = X^d ∂_d f, with exact trigonometric partials.
            let mut lie = vec![0.0; grid.len()];
            for d in 0..grid.ndim() {
                let df = f.partial(d);
                let dfs = grid.sample(|xp| df.eval(xp));
                for i in 0..grid.len() {
                    lie[i] += xs[d][i] * dfs[i];
                }
            }
            let hbar = params.hbar;
            sup_relative_residual(&psis, |psi| {
                let pq = apply_p_sampled(&xs, &apply_q(&fs, psi)?, params)?;
                let qp = apply_q(&fs, &apply_p_sampled(&xs, psi, params)?)?;
                // (ħ/i) Q(L_X f) ψ
                let diff: f64 = (0..grid.len())
                    .map(|i| {
                        let rhs = Complex64::new(0.0, -hbar) * lie[i] * psi.data()[i];
                        (pq.data()[i] - qp.data()[i] - rhs).norm_sqr()
                    })
                    .sum::<f64>();
                Ok((diff * grid.cell_volume()).sqrt())
            })
        }
        CommutatorKind::PP { x, y } => {
            check_degree(x.degree().max(y.degree()), grid)?;
            let xs = x.sample(grid);
            let ys = y.sample(grid);
            let bracket = x.lie_bracket_samples(y, grid);
            let hbar = params.hbar;
            sup_relative_residual(&psis, |psi| {
                let xy = apply_p_sampled(&xs, &apply_p_sampled(&ys, psi, params)?, params)?;
                let yx = apply_p_sampled(&ys, &apply_p_sampled(&xs, psi, params)?, params)?;
                let pb = apply_p_sampled(&bracket, psi, params)?;
                let diff: f64 = (0..grid.len())
                    .map(|i| {
                        let rhs = Complex64::new(0.0, -hbar) * pb.data()[i];
                        (xy.data()[i] - yx.data()[i] - rhs).norm_sqr()
                    })
                    .sum::<f64>();
                Ok((diff * grid.cell_volume()).sqrt())
            })
        }
        CommutatorKind::PPMagnetic { x, y, potential, e, phi } => {
            check_degree(x.degree().max(y.degree()), grid)?;
            let xs = x.sample(grid);
            let ys = y.sample(grid);
            let bracket = x.lie_bracket_samples(y, grid);
            // φ(X, Y) = φ_12 (X¹Y² − X²Y¹)
            let fxy: Vec<f64> = (0..grid.len())
                .map(|i| phi.component()[i] * (xs[0][i] * ys[1][i] - xs[1][i] * ys[0][i]))
                .collect();
            let hbar = params.hbar;
            sup_relative_residual(&psis, |psi| {
                let py = apply_p_impl(&ys, psi, params, Some(potential))?;
                let px = apply_p_impl(&xs, psi, params, Some(potential))?;
                let xy = apply_p_impl(&xs, &py, params, Some(potential))?;
                let yx = apply_p_impl(&ys, &px, params, Some(potential))?;
                let pb = apply_p_impl(&bracket, psi, params, Some(potential))?;
                let diff: f64 = (0..grid.len())
                    .map(|i| {
                        let rhs = Complex64::new(0.0, -hbar)
                            * (pb.data()[i] + e * fxy[i] * psi.data()[i]);
                        (xy.data()[i] - yx.data()[i] - rhs).norm_sqr()
                    })
                    .sum::<f64>();
                Ok((diff * grid.cell_volume()).sqrt())
            })
        }
    }
}

/// Residual of `Q(f) + α Q(g) = Q(f + αg)` on one state.
pub fn linearity_residual_q(
    f: &TrigPoly,
    g: &TrigPoly,
    alpha: f64,
    psi: &WaveFunction,
) -> Result<f64, KinematicsError> {
    let grid = psi.grid();
    let fs = grid.sample(|x| f.eval(x));
    let gs = grid.sample(|x| g.eval(x));
    let sum = f.plus(&g.scaled(alpha));
    let ss = grid.sample(|x| sum.eval(x));
    let lhs_f = apply_q(&fs, psi)?;
    let lhs_g = apply_q(&gs, psi)?;
    let rhs = apply_q(&ss, psi)?;
    let diff: f64 = (0..grid.len())
        .map(|i| (lhs_f.data()[i] + alpha * lhs_g.data()[i] - rhs.data()[i]).norm_sqr())
        .sum::<f64>();
    Ok((diff * grid.cell_volume()).sqrt() / psi.norm())
}

/// Residual of `P(X) + α P(Y) = P(X + αY)` on one state.
pub fn linearity_residual_p(
    x: &VectorFieldSpec,
    y: &VectorFieldSpec,
    alpha: f64,
    psi: &WaveFunction,
    params: &KinematicsParams,
) -> Result<f64, KinematicsError> {
    let grid = psi.grid();
    let px = apply_p(x, psi, params)?;
    let py = apply_p(y, psi, params)?;
    let psum = apply_p(&x.plus_scaled(y, alpha), psi, params)?;
    let diff: f64 = (0..grid.len())
        .map(|i| (px.data()[i] + alpha * py.data()[i] - psum.data()[i]).norm_sqr())
        .sum::<f64>();
    Ok((diff * grid.cell_volume()).sqrt() / psi.norm())
}

/// Symmetry defect `|⟨φ|Q(f)ψ⟩ − conj(⟨ψ|Q(f)φ⟩)|` maximized over state pairs.
pub fn symmetry_residual_q(f: &TrigPoly, psis: &[WaveFunction]) -> Result<f64, KinematicsError> {
    let mut sup = 0.0f64;
    for (i, a) in psis.iter().enumerate() {
        for b in psis.iter().skip(i) {
            let fs = a.grid().sample(|x| f.eval(x));
            let qb = apply_q(&fs, b)?;
            let qa = apply_q(&fs, a)?;
            let lhs = a.inner(&qb)?;
            let rhs = b.inner(&qa)?.conj();
            sup = sup.max((lhs - rhs).norm());
        }
    }
    Ok(sup)
}

/// Symmetry defect `|⟨φ|P(X)ψ⟩ − conj(⟨ψ|P(X)φ⟩)|` maximized over state pairs.
pub fn symmetry_residual_p(
    x: &VectorFieldSpec,
    psis: &[WaveFunction],
    params: &KinematicsParams,
) -> Result<f64, KinematicsError> {
    let mut sup = 0.0f64;
    for (i, a) in psis.iter().enumerate() {
        for b in psis.iter().skip(i) {
            let pb = apply_p(x, b, params)?;
            let pa = apply_p(x, a, params)?;
            let lhs = a.inner(&pb)?;
            let rhs = b.inner(&pa)?.conj();
            sup = sup.max((lhs - rhs).norm());
        }
    }
    Ok(sup)
}

/// Localization/displacement compatibility: sup over test vectors of
/// `‖V_s E(B) V_{−s} ψ − E(Φ_s B) ψ‖` with `Φ_s B` the forward interval
/// shift. Requires a constant field whose displacement `s·X` is a grid
/// multiple, so the conjugation is an exact permutation.
pub fn imprimitivity_residual(
    x: &VectorFieldSpec,
    s: f64,
    b: &BorelSet,
    psis: &[WaveFunction],
    params: &KinematicsParams,
) -> Result<f64, KinematicsError> {
    let grid = params.grid();
    let v = x
        .constant_value()
        .ok_or_else(|| KinematicsError::UnsupportedManifold(grid.kind()))?;
    let delta: Vec<f64> = v.iter().map(|&vi| s * vi).collect();
    for (d, &dl) in delta.iter().enumerate() {
        let steps = dl / grid.spacing(d);
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(KinematicsError::DisplacementNotAligned(dl, grid.spacing(d)));
        }
    }
    let shifted = b.displaced(&delta);
    let mut sup = 0.0f64;
    for psi in psis {
        let inner = flow_unitary(x, -s, psi, params)?;
        let projected = apply_e(b, &inner)?;
        let lhs = flow_unitary(x, s, &projected, params)?;
        let rhs = apply_e(&shifted, psi)?;
        sup = sup.max(lhs.l2_distance(&rhs)?);
    }
    Ok(sup)
}

/// Eigenvalues of `P(∂_d)` on the plane-wave band `|m| ≤ band`, evaluated by
/// applying the operator to each basis state and taking the Rayleigh
/// quotient. Ascending order. Requires a circle or torus with constant ω.
pub fn momentum_spectrum(
    params: &KinematicsParams,
    direction: usize,
    band: usize,
) -> Result<Vec<f64>, KinematicsError> {
    let grid = params.grid();
    match grid.kind() {
        ManifoldKind::Circle | ManifoldKind::Torus2 => {}
        other => return Err(KinematicsError::UnsupportedManifold(other)),
    }
    if !params.omega.is_constant() {
        return Err(KinematicsError::UnsupportedManifold(grid.kind()));
    }
    let axis = VectorFieldSpec::axis(grid.spec().extents(), direction);
    let mut out = Vec::with_capacity(2 * band + 1);
    for m in -(band as i64)..=(band as i64) {
        let mut modes = vec![0i64; grid.ndim()];
        modes[direction] = m;
        let pw = WaveFunction::plane_wave(grid, &modes)?;
        let ppw = apply_p(&axis, &pw, params)?;
        out.push(pw.inner(&ppw)?.re / pw.norm_sq());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldSpec;
    use crate::trig::Harmonic;
    use std::f64::consts::{PI, TAU};

    fn circle_grid(n: usize) -> Grid {
        Grid::new(ManifoldSpec::circle(TAU).unwrap(), vec![n]).unwrap()
    }

    fn torus_grid(n: usize) -> Grid {
        Grid::new(ManifoldSpec::torus2(TAU, TAU).unwrap(), vec![n, n]).unwrap()
    }

    #[test]
    fn localization_projection_basics() {
        let grid = circle_grid(128);
        let opts = HarnessOptions::for_grid(&grid);
        let psi = &test_vectors(&grid, &opts).unwrap()[0];

        let full = BorelSet::full(grid.spec().extents());
        assert_eq!(apply_e(&full, psi).unwrap().data(), psi.data());

        let empty = BorelSet::empty(grid.spec().extents());
        assert!(apply_e(&empty, psi).unwrap().data().iter().all(|v| v.norm() == 0.0));

        let half = BorelSet::new(grid.spec().extents(), vec![vec![(0.0, PI)]]).unwrap();
        let once = apply_e(&half, psi).unwrap();
        let twice = apply_e(&half, &once).unwrap();
        assert_eq!(once.data(), twice.data());
    }

    #[test]
    fn borel_set_rejects_unaligned_endpoints() {
        let grid = circle_grid(8);
        let b = BorelSet::new(grid.spec().extents(), vec![vec![(0.0, 1.0)]]).unwrap();
        assert!(matches!(b.indicator(&grid), Err(KinematicsError::NotAligned(..))));
    }

    #[test]
    fn borel_set_displacement_wraps_and_splits() {
        let ext = [TAU];
        let b = BorelSet::new(&ext, vec![vec![(0.0, PI)]]).unwrap();
        let shifted = b.displaced(&[0.75 * TAU]);
        // [0, π) + 3π/2 wraps into [0, π/2) ∪ [3π/2, 2π).
        let ivs = &shifted.intervals()[0];
        assert_eq!(ivs.len(), 2);
        assert!((ivs[0].0 - 0.0).abs() < 1e-12 && (ivs[0].1 - PI / 2.0).abs() < 1e-12);
        assert!((ivs[1].0 - 1.5 * PI).abs() < 1e-12 && (ivs[1].1 - TAU).abs() < 1e-12);
    }

    #[test]
    fn q_operator_basics() {
        let grid = circle_grid(64);
        let opts = HarnessOptions::for_grid(&grid);
        let psi = &test_vectors(&grid, &opts).unwrap()[0];

        let ones = vec![1.0; grid.len()];
        assert_eq!(apply_q(&ones, psi).unwrap().data(), psi.data());

        // ⟨ψ|Q(χ_B)ψ⟩ = ⟨ψ|E(B)ψ⟩
        let b = BorelSet::new(grid.spec().extents(), vec![vec![(0.0, PI)]]).unwrap();
        let chi = b.indicator(&grid).unwrap();
        let via_q = psi.inner(&apply_q(&chi, psi).unwrap()).unwrap();
        let via_e = psi.inner(&apply_e(&b, psi).unwrap()).unwrap();
        assert!((via_q - via_e).norm() < 1e-15);
    }

    #[test]
    fn p_operator_aharonov_bohm_eigenvalue() {
        // P(∂_φ) on e^{ikφ} with twist θ: eigenvalue ħk + θ.
        let grid = circle_grid(64);
        let (hbar, theta, k) = (0.7, 0.3, 5i64);
        let params = KinematicsParams::twisted(&grid, hbar, 1.3, &[theta]).unwrap();
        let psi = WaveFunction::plane_wave(&grid, &[k]).unwrap();
        let x = VectorFieldSpec::axis(&[TAU], 0);
        let out = apply_p(&x, &psi, &params).unwrap();
        let ev = hbar * k as f64 + theta;
        let err = out
            .data()
            .iter()
            .zip(psi.data())
            .map(|(o, p)| (o - ev * p).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12 * (1.0 + ev.abs()));
    }

    #[test]
    fn p_operator_is_c_independent_for_divergence_free_fields() {
        let spec = ManifoldSpec::line_segment(20.0).unwrap();
        let grid = Grid::new(spec, vec![64]).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[10.0], &[1.5]).unwrap();
        let x = VectorFieldSpec::axis(&[20.0], 0);
        let p0 = KinematicsParams::untwisted(&grid, 1.0, 0.0).unwrap();
        let p1 = KinematicsParams::untwisted(&grid, 1.0, 17.5).unwrap();
        let out0 = apply_p(&x, &psi, &p0).unwrap();
        let out1 = apply_p(&x, &psi, &p1).unwrap();
        // Bitwise identical on the same code path.
        assert_eq!(out0.data(), out1.data());
    }

    #[test]
    fn p_zero_field_gives_zero() {
        let grid = circle_grid(32);
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.4).unwrap();
        let psi = WaveFunction::plane_wave(&grid, &[2]).unwrap();
        let zero = VectorFieldSpec::zero(&[TAU]);
        let out = apply_p(&zero, &psi, &params).unwrap();
        assert!(out.data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn p_rejects_aliasing_degrees() {
        let grid = circle_grid(32);
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.0).unwrap();
        let psi = WaveFunction::plane_wave(&grid, &[0]).unwrap();
        let x = VectorFieldSpec::new(vec![TrigPoly::axis_harmonic(
            &[TAU],
            0,
            Harmonic::Sin(9),
            1.0,
        )]);
        assert!(matches!(
            apply_p(&x, &psi, &params),
            Err(KinematicsError::DegreeOverflow { .. })
        ));
    }

    #[test]
    fn flow_shift_moves_states_forward() {
        let grid = circle_grid(128);
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.9).unwrap();
        let x = VectorFieldSpec::axis(&[TAU], 0);
        let psi = WaveFunction::periodic_bump(&grid, &[PI], &[3.0]).unwrap();
        let m = 16usize;
        let s = m as f64 * grid.spacing(0);
        let moved = flow_unitary(&x, s, &psi, &params).unwrap();
        // Sample rotation: new[i] = old[i − m].
        for i in 0..grid.len() {
            let j = (i + grid.len() - m) % grid.len();
            assert!((moved.data()[i] - psi.data()[j]).norm() < 1e-14);
        }
    }

    #[test]
    fn flow_group_law() {
        let grid = circle_grid(64);
        let params = KinematicsParams::twisted(&grid, 0.8, 0.0, &[0.4]).unwrap();
        let x = VectorFieldSpec::axis(&[TAU], 0);
        let opts = HarnessOptions::for_grid(&grid);
        let psi = &test_vectors(&grid, &opts).unwrap()[0];
        let (s1, s2) = (0.37, -1.12);
        let once = flow_unitary(&x, s1 + s2, psi, &params).unwrap();
        let twice =
            flow_unitary(&x, s1, &flow_unitary(&x, s2, psi, &params).unwrap(), &params).unwrap();
        assert!(once.l2_distance(&twice).unwrap() < 1e-10);
    }

    #[test]
    fn flow_s_zero_is_identity() {
        let grid = circle_grid(32);
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.0).unwrap();
        let x = VectorFieldSpec::axis(&[TAU], 0);
        let psi = WaveFunction::plane_wave(&grid, &[1]).unwrap();
        let out = flow_unitary(&x, 0.0, &psi, &params).unwrap();
        assert_eq!(out.data(), psi.data());
    }

    #[test]
    fn numeric_flow_matches_exact_flow_for_constant_field() {
        let grid = circle_grid(64);
        let params = KinematicsParams::twisted(&grid, 1.0, 0.5, &[0.2]).unwrap();
        let x = VectorFieldSpec::constant(&[TAU], &[0.8]);
        let psi = WaveFunction::periodic_bump(&grid, &[PI], &[2.0]).unwrap();
        let s = 0.31;
        let exact = flow_unitary(&x, s, &psi, &params).unwrap();
        // Drive the numeric integrator over the same generator.
        let components = x.sample(&grid);
        let factor = Complex64::new(0.0, -1.0);
        let rhs = |state: &WaveFunction| -> Result<Vec<Complex64>, KinematicsError> {
            let p = apply_p_sampled(&components, state, &params)?;
            Ok(p.data().iter().map(|v| factor * v).collect())
        };
        let n = 400;
        let ds = s / n as f64;
        let mut state = psi.clone();
        for _ in 0..n {
            state = rk4_step(&state, ds, &rhs).unwrap();
        }
        assert!(state.l2_distance(&exact).unwrap() < 1e-9);
    }

    #[test]
    fn numeric_flow_branch_is_unitary_and_composes() {
        // Non-constant X forces the numeric path.
        let grid = circle_grid(64);
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.4).unwrap();
        let x = VectorFieldSpec::new(vec![TrigPoly::constant(&[TAU], 1.0)
            .plus(&TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Sin(1), 0.3))]);
        let psi = WaveFunction::periodic_bump(&grid, &[PI], &[1.5]).unwrap();
        let s = 0.2;
        let moved = flow_unitary(&x, s, &psi, &params).unwrap();
        assert!((moved.norm() - 1.0).abs() < 1e-8, "norm {:.3e}", moved.norm() - 1.0);
        // One-parameter property to integrator accuracy.
        let half = flow_unitary(&x, s / 2.0, &psi, &params).unwrap();
        let twice = flow_unitary(&x, s / 2.0, &half, &params).unwrap();
        assert!(moved.l2_distance(&twice).unwrap() < 1e-8);
        // An unreachable drift tolerance is reported, not swallowed.
        let strict = FlowOptions { substep_scale: 0.5, drift_tol: 1e-18 };
        assert!(matches!(
            flow_unitary_with(&x, s, &psi, &params, strict),
            Err(KinematicsError::FlowDrift { .. })
        ));
    }

    #[test]
    fn commutator_qq_vanishes() {
        let grid = circle_grid(128);
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.0).unwrap();
        let f = TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Sin(3), 1.0);
        let g = TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Cos(5), 2.0);
        let opts = HarnessOptions::for_grid(&grid);
        let r = commutator_residual(&CommutatorKind::QQ { f, g }, &params, &opts).unwrap();
        assert!(r < 1e-14);
    }

    #[test]
    fn commutator_pq_matches_lie_derivative() {
        let grid = circle_grid(128);
        let params = KinematicsParams::twisted(&grid, 0.9, 0.7, &[0.3]).unwrap();
        let x = VectorFieldSpec::axis(&[TAU], 0);
        let f = TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Sin(1), 1.0);
        let opts = HarnessOptions::for_grid(&grid);
        let r = commutator_residual(&CommutatorKind::PQ { x, f }, &params, &opts).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn commutator_pp_on_torus_with_constant_twist() {
        let grid = torus_grid(32);
        let params = KinematicsParams::twisted(&grid, 1.0, 0.4, &[0.3, 0.6]).unwrap();
        let x = VectorFieldSpec::axis(&[TAU, TAU], 0);
        let y = VectorFieldSpec::axis(&[TAU, TAU], 1);
        let opts = HarnessOptions::for_grid(&grid);
        let r = commutator_residual(&CommutatorKind::PP { x, y }, &params, &opts).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn commutator_pp_with_nonconstant_fields() {
        let grid = torus_grid(64);
        let ext = [TAU, TAU];
        let params = KinematicsParams::twisted(&grid, 1.0, 0.2, &[0.1, 0.0]).unwrap();
        let x = VectorFieldSpec::new(vec![
            TrigPoly::axis_harmonic(&ext, 1, Harmonic::Sin(2), 0.7),
            TrigPoly::constant(&ext, 0.3),
        ]);
        let y = VectorFieldSpec::new(vec![
            TrigPoly::constant(&ext, 1.0),
            TrigPoly::axis_harmonic(&ext, 0, Harmonic::Cos(1), 0.5),
        ]);
        let opts = HarnessOptions::for_grid(&grid);
        let r = commutator_residual(&CommutatorKind::PP { x, y }, &params, &opts).unwrap();
        assert!(r < 1e-10, "residual {r:.3e}");
    }

    #[test]
    fn magnetic_commutator_picks_up_field_term() {
        // Exact field φ = dA with A = −(e-independent) cos x¹ dx², so
        // φ_12 = ∂_1 A_2 = sin x¹.
        let grid = torus_grid(64);
        let ext = [TAU, TAU];
        let e = 0.8;
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.3).unwrap();
        let a_comps = vec![vec![0.0; grid.len()], grid.sample(|p| -e * p[0].cos())];
        let potential = OneForm::from_components_unchecked(&grid, a_comps).unwrap();
        let phi = TwoForm::from_samples(&grid, grid.sample(|p| p[0].sin())).unwrap();
        let x = VectorFieldSpec::axis(&ext, 0);
        let y = VectorFieldSpec::axis(&ext, 1);
        let opts = HarnessOptions::for_grid(&grid);
        let with_term = commutator_residual(
            &CommutatorKind::PPMagnetic {
                x: x.clone(),
                y: y.clone(),
                potential: potential.clone(),
                e,
                phi: phi.clone(),
            },
            &params,
            &opts,
        )
        .unwrap();
        assert!(with_term < 1e-10, "residual {with_term:.3e}");
        // Without the field term (e = 0 in the RHS) the residual is O(e·φ).
        let without = commutator_residual(
            &CommutatorKind::PPMagnetic { x, y, potential, e: 0.0, phi },
            &params,
            &opts,
        )
        .unwrap();
        assert!(without > 1e-2, "control residual {without:.3e}");
    }

    #[test]
    fn imprimitivity_conjugation_matches_interval_shift() {
        let grid = circle_grid(128);
        let params = KinematicsParams::twisted(&grid, 1.0, 0.8, &[0.3]).unwrap();
        let x = VectorFieldSpec::axis(&[TAU], 0);
        let b = BorelSet::new(&[TAU], vec![vec![(0.0, PI)]]).unwrap();
        let opts = HarnessOptions::for_grid(&grid);
        let psis = test_vectors(&grid, &opts).unwrap();
        let s = TAU * 16.0 / 128.0;
        let r = imprimitivity_residual(&x, s, &b, &psis, &params).unwrap();
        assert!(r < 1e-12, "residual {r:.3e}");
        // s = 0 and B = M vanish identically.
        assert_eq!(imprimitivity_residual(&x, 0.0, &b, &psis, &params).unwrap(), 0.0);
        let full = BorelSet::full(&[TAU]);
        let r_full = imprimitivity_residual(&x, s, &full, &psis, &params).unwrap();
        assert!(r_full < 1e-13);
    }

    #[test]
    fn imprimitivity_rejects_non_grid_displacement() {
        let grid = circle_grid(128);
        let params = KinematicsParams::untwisted(&grid, 1.0, 0.0).unwrap();
        let x = VectorFieldSpec::axis(&[TAU], 0);
        let b = BorelSet::new(&[TAU], vec![vec![(0.0, PI)]]).unwrap();
        let psis = test_vectors(&grid, &HarnessOptions::for_grid(&grid)).unwrap();
        assert!(matches!(
            imprimitivity_residual(&x, 0.123, &b, &psis, &params),
            Err(KinematicsError::DisplacementNotAligned(..))
        ));
    }

    #[test]
    fn momentum_spectrum_is_twisted_integer_lattice() {
        let grid = circle_grid(128);
        let band = 16;
        // θ = 0: plain integers (ħ = 1, L = 2π).
        let untwisted = KinematicsParams::untwisted(&grid, 1.0, 0.0).unwrap();
        for (i, &ev) in momentum_spectrum(&untwisted, 0, band).unwrap().iter().enumerate() {
            let m = i as f64 - band as f64;
            assert!((ev - m).abs() < 1e-12, "mode {m}: {ev}");
        }
        // θ = 0.3 rigidly shifts the whole ladder.
        let theta = 0.3;
        let params = KinematicsParams::twisted(&grid, 1.0, 0.0, &[theta]).unwrap();
        let spectrum = momentum_spectrum(&params, 0, band).unwrap();
        for (i, &ev) in spectrum.iter().enumerate() {
            let m = i as f64 - band as f64;
            assert!((ev - (m + theta)).abs() < 1e-12, "mode {m}: {ev}");
        }
    }

    #[test]
    fn theta_reduction_and_lattice_relabeling() {
        let grid = circle_grid(64);
        let hbar = 1.0;
        let lattice = TAU * hbar / TAU; // 2πħ/L = 1 on the unit circle
        let p1 = KinematicsParams::twisted(&grid, hbar, 0.0, &[0.3]).unwrap();
        let p2 = KinematicsParams::twisted(&grid, hbar, 0.0, &[0.3 + lattice]).unwrap();
        assert!((p1.theta_reduced()[0] - p2.theta_reduced()[0]).abs() < 1e-12);

        // Spectra agree modulo an index shift by one lattice unit.
        let band = 8;
        let s1 = momentum_spectrum(&p1, 0, band).unwrap();
        let s2 = momentum_spectrum(&p2, 0, band).unwrap();
        for i in 0..(2 * band) {
            assert!((s2[i] - s1[i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_symmetry_on_band_limited_states() {
        let grid = circle_grid(128);
        let params = KinematicsParams::twisted(&grid, 1.0, 1.1, &[0.4]).unwrap();
        let opts = HarnessOptions::for_grid(&grid);
        let psis = test_vectors(&grid, &opts).unwrap();
        let f = TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Cos(2), 1.5);
        assert!(symmetry_residual_q(&f, &psis).unwrap() < 1e-13);
        let x = VectorFieldSpec::new(vec![TrigPoly::axis_harmonic(
            &[TAU],
            0,
            Harmonic::Sin(2),
            0.9,
        )]);
        assert!(symmetry_residual_p(&x, &psis, &params).unwrap() < 1e-10);
    }

    #[test]
    fn operator_linearity() {
        let grid = circle_grid(128);
        let params = KinematicsParams::twisted(&grid, 0.7, 0.5, &[0.2]).unwrap();
        let opts = HarnessOptions::for_grid(&grid);
        let psi = &test_vectors(&grid, &opts).unwrap()[0];
        let f = TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Sin(2), 1.0);
        let g = TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Cos(3), 0.7);
        assert!(linearity_residual_q(&f, &g, -1.7, psi).unwrap() < 1e-13);
        let x = VectorFieldSpec::new(vec![TrigPoly::axis_harmonic(
            &[TAU],
            0,
            Harmonic::Sin(1),
            1.0,
        )]);
        let y = VectorFieldSpec::new(vec![TrigPoly::axis_harmonic(
            &[TAU],
            0,
            Harmonic::Cos(2),
            0.4,
        )]);
        assert!(linearity_residual_p(&x, &y, 2.3, psi, &params).unwrap() < 1e-12);
    }

    #[test]
    fn params_reject_invalid_labels() {
        let grid = torus_grid(16);
        assert!(matches!(
            KinematicsParams::untwisted(&grid, 0.0, 0.0),
            Err(KinematicsError::NonPositiveHbar(_))
        ));
        let comps = vec![vec![0.0; grid.len()], grid.sample(|x| x[0].cos())];
        let open = OneForm::from_components_unchecked(&grid, comps).unwrap();
        assert!(matches!(
            KinematicsParams::new(1.0, 0.0, open),
            Err(KinematicsError::OmegaNotClosed)
        ));
    }
}
