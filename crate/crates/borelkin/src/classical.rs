//! Classical phase-space oracle: observables affine in momentum, standard
//! and magnetic Poisson brackets by central finite differences, and
//! structure-preserving trajectory integration with `ẋ = g♯p` built into the
//! update.

use thiserror::Error;

use crate::kinematics::VectorFieldSpec;
use crate::manifold::ManifoldSpec;
use crate::trig::TrigPoly;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("classical: time step must be strictly positive, got {0}")]
    BadTimeStep(f64),
    #[error("classical: non-finite state at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },
    #[error("classical: trajectory too short, need at least {need} states")]
    TooShort { need: usize },
}

/// A point of the cotangent bundle: configuration coordinates (reduced into
/// the fundamental domain) and covector components.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(spec: &ManifoldSpec, mut x: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(x.len(), spec.ndim());
        assert_eq!(p.len(), spec.ndim());
        spec.wrap(&mut x);
        Self { x, p }
    }

    pub fn ndim(&self) -> usize {
        self.x.len()
    }
}

/// Real function on phase space. Blanket-implemented for closures so ad-hoc
/// observables can be passed straight to the bracket.
pub trait PhaseFunction {
    fn value(&self, alpha: &PhasePoint) -> f64;
}

impl<F: Fn(&PhasePoint) -> f64> PhaseFunction for F {
    fn value(&self, alpha: &PhasePoint) -> f64 {
        self(alpha)
    }
}

/// The quantizable observables: functions of position, functions linear in
/// momentum, and their sums.
#[derive(Debug, Clone)]
pub enum ClassicalObservable {
    /// `Q_f(α) = f(x)`
    Position(TrigPoly),
    /// `P_X(α) = Σ_d p_d X^d(x)`
    Momentum(VectorFieldSpec),
    /// `Q_f + P_X`
    Affine(TrigPoly, VectorFieldSpec),
}

impl PhaseFunction for ClassicalObservable {
    fn value(&self, alpha: &PhasePoint) -> f64 {
        eval_observable(self, alpha)
    }
}

/// Evaluate a quantizable observable at a phase point.
pub fn eval_observable(obs: &ClassicalObservable, alpha: &PhasePoint) -> f64 {
    match obs {
        ClassicalObservable::Position(f) => f.eval(&alpha.x),
        ClassicalObservable::Momentum(x) => {
            x.eval(&alpha.x).iter().zip(&alpha.p).map(|(xi, pi)| xi * pi).sum()
        }
        ClassicalObservable::Affine(f, x) => {
            f.eval(&alpha.x)
                + x.eval(&alpha.x).iter().zip(&alpha.p).map(|(xi, pi)| xi * pi).sum::<f64>()
        }
    }
}

/// Relative step for the central-difference partials.
pub const BRACKET_REL_STEP: f64 = 1e-5;

fn partial_x(f: &impl PhaseFunction, alpha: &PhasePoint, d: usize) -> f64 {
    let h = BRACKET_REL_STEP * (1.0 + alpha.x[d].abs());
    let mut plus = alpha.clone();
    plus.x[d] += h;
    let mut minus = alpha.clone();
    minus.x[d] -= h;
    (f.value(&plus) - f.value(&minus)) / (2.0 * h)
}

fn partial_p(f: &impl PhaseFunction, alpha: &PhasePoint, d: usize) -> f64 {
    let h = BRACKET_REL_STEP * (1.0 + alpha.p[d].abs());
    let mut plus = alpha.clone();
    plus.p[d] += h;
    let mut minus = alpha.clone();
    minus.p[d] -= h;
    (f.value(&plus) - f.value(&minus)) / (2.0 * h)
}

/// Poisson bracket at a phase point, with the optional magnetic term
/// from a field two-form evaluated at `α.x`:
///
/// ```text
/// {F,G}_e = Σ_d (∂F/∂p_d ∂G/∂x^d − ∂F/∂x^d ∂G/∂p_d)
///           + e·φ_12(x)·(∂F/∂p_1 ∂G/∂p_2 − ∂F/∂p_2 ∂G/∂p_1)
/// ```
///
/// The orientation is pinned by the relations it must reproduce on the
/// quantizable observables: `{P_X, Q_f} = Q_{L_X f}`,
/// `{P_X, P_Y} = P_{[X,Y]}` and `{P_∂₁, P_∂₂}_e = e·φ_12`.
///
/// `e = 0` recovers the standard bracket. Partials are central finite
/// differences with relative step `1e-5`, which budgets the bracket accuracy
/// at about `1e-6` for order-one observables.
pub fn poisson_bracket(
    f: &impl PhaseFunction,
    g: &impl PhaseFunction,
    alpha: &PhasePoint,
    e: f64,
    phi12_at_x: f64,
) -> f64 {
    let ndim = alpha.ndim();
    let mut sum = 0.0;
    for d in 0..ndim {
        sum += partial_p(f, alpha, d) * partial_x(g, alpha, d)
            - partial_x(f, alpha, d) * partial_p(g, alpha, d);
    }
    if e != 0.0 && ndim == 2 {
        let fp1 = partial_p(f, alpha, 0);
        let fp2 = partial_p(f, alpha, 1);
        let gp1 = partial_p(g, alpha, 0);
        let gp2 = partial_p(g, alpha, 1);
        sum += e * phi12_at_x * (fp1 * gp2 - fp2 * gp1);
    }
    sum
}

/// Integrate `ẋ = g♯p`, `ṗ = force(x, p)` with a kick-drift-kick leapfrog
/// step; second order, symplectic for momentum-independent forces. Returns
/// the states at `t = 0, dt, …, T` with positions wrapped into the
/// fundamental domain.
pub fn integrate_trajectory(
    force: &impl Fn(&PhasePoint) -> Vec<f64>,
    alpha0: &PhasePoint,
    dt: f64,
    t_final: f64,
    spec: &ManifoldSpec,
) -> Result<Vec<PhasePoint>, ClassicalError> {
    if !(dt > 0.0) {
        return Err(ClassicalError::BadTimeStep(dt));
    }
    let n_steps = (t_final / dt).round() as usize;
    let ginv = spec.metric_inv();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(alpha0.clone());
    let mut state = alpha0.clone();
    for step in 0..n_steps {
        let kick1 = force(&state);
        let mut half = state.clone();
        for d in 0..half.ndim() {
            half.p[d] += 0.5 * dt * kick1[d];
        }
        for d in 0..half.ndim() {
            half.x[d] = state.x[d] + dt * ginv[d] * half.p[d];
        }
        spec.wrap(&mut half.x);
        let kick2 = force(&half);
        for d in 0..half.ndim() {
            half.p[d] += 0.5 * dt * kick2[d];
        }
        if half.x.iter().chain(&half.p).any(|v| !v.is_finite()) {
            return Err(ClassicalError::NonFinite { step, time: step as f64 * dt });
        }
        state = half;
        out.push(state.clone());
    }
    Ok(out)
}

/// Scalar function on configuration space with its coordinate partials;
/// the classical Ehrenfest check needs both.
pub trait ConfigFunction {
    fn value(&self, x: &[f64]) -> f64;
    fn partial(&self, d: usize, x: &[f64]) -> f64;
}

impl ConfigFunction for TrigPoly {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn partial(&self, d: usize, x: &[f64]) -> f64 {
        TrigPoly::partial(self, d).eval(x)
    }
}

/// The coordinate function `x ↦ x_d`. Only meaningful for trajectories that
/// stay clear of the periodic seam.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateFunction(pub usize);

impl ConfigFunction for CoordinateFunction {
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0]
    }

    fn partial(&self, d: usize, _x: &[f64]) -> f64 {
        if d == self.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// `P_{grad_g f}(α) = Σ_d p_d g^{dd} ∂_d f(x)`.
pub fn momentum_of_gradient(
    f: &impl ConfigFunction,
    alpha: &PhasePoint,
    spec: &ManifoldSpec,
) -> f64 {
    let ginv = spec.metric_inv();
    (0..alpha.ndim()).map(|d| alpha.p[d] * ginv[d] * f.partial(d, &alpha.x)).sum()
}

/// Max over interior trajectory times of
/// `|d/dt f(x_t) − P_{grad_g f}(α_t)|`, with the time derivative by central
/// differences. The relation is force-independent; the residual measures the
/// `O(dt²)` of the differencing plus the integrator.
pub fn classical_ehrenfest_residual(
    f: &impl ConfigFunction,
    trajectory: &[PhasePoint],
    dt: f64,
    spec: &ManifoldSpec,
) -> Result<f64, ClassicalError> {
    if trajectory.len() < 3 {
        return Err(ClassicalError::TooShort { need: 3 });
    }
    let mut max = 0.0f64;
    for n in 1..trajectory.len() - 1 {
        let qdot =
            (f.value(&trajectory[n + 1].x) - f.value(&trajectory[n - 1].x)) / (2.0 * dt);
        let rhs = momentum_of_gradient(f, &trajectory[n], spec);
        max = max.max((qdot - rhs).abs());
    }
    Ok(max)
}
