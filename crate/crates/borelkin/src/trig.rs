//! Trigonometric polynomials on periodic boxes.
//!
//! Observables, potentials and vector-field components are specified as
//! sums of separable harmonics `amp · ∏_d h_d(2π m_d x_d / L_d)` with
//! `h ∈ {1, cos, sin}`. These evaluate anywhere (not just on grid points),
//! differentiate exactly, and have a known band limit, which is what the
//! spectral-exactness arguments in the operator tests rely on.

use std::f64::consts::TAU;

/// One factor of a separable harmonic term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Harmonic {
    /// Constant factor 1.
    One,
    /// `cos(2π m x / L)`.
    Cos(u32),
    /// `sin(2π m x / L)`.
    Sin(u32),
}

impl Harmonic {
    fn eval(self, angle: f64) -> f64 {
        match self {
            Harmonic::One => 1.0,
            Harmonic::Cos(m) => (m as f64 * angle).cos(),
            Harmonic::Sin(m) => (m as f64 * angle).sin(),
        }
    }

    /// Derivative w.r.t. the coordinate, as (scale, harmonic) with the
    /// `2π m / L` factor folded into `scale`.
    fn derivative(self, period: f64) -> (f64, Harmonic) {
        match self {
            Harmonic::One => (0.0, Harmonic::One),
            Harmonic::Cos(m) => (-(m as f64) * TAU / period, Harmonic::Sin(m)),
            Harmonic::Sin(m) => (m as f64 * TAU / period, Harmonic::Cos(m)),
        }
    }

    fn degree(self) -> u32 {
        match self {
            Harmonic::One => 0,
            Harmonic::Cos(m) | Harmonic::Sin(m) => m,
        }
    }
}

/// A single separable term `amp · ∏_d factor_d(x_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub amp: f64,
    pub factors: Vec<Harmonic>,
}

/// Real trigonometric polynomial on a periodic box with given extents.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    extents: Vec<f64>,
    terms: Vec<TrigTerm>,
}

impl TrigPoly {
    /// The zero polynomial.
    pub fn zero(extents: &[f64]) -> Self {
        Self { extents: extents.to_vec(), terms: Vec::new() }
    }

    /// A constant.
    pub fn constant(extents: &[f64], value: f64) -> Self {
        let factors = vec![Harmonic::One; extents.len()];
        Self { extents: extents.to_vec(), terms: vec![TrigTerm { amp: value, factors }] }
    }

    pub fn new(extents: &[f64], terms: Vec<TrigTerm>) -> Self {
        for term in &terms {
            assert_eq!(
                term.factors.len(),
                extents.len(),
                "term arity must match the number of dimensions"
            );
        }
        Self { extents: extents.to_vec(), terms }
    }

    /// Convenience: a single harmonic along one axis of a possibly
    /// multi-dimensional box, e.g. `amp·sin(2π m x_d/L_d)`.
    pub fn axis_harmonic(extents: &[f64], dim: usize, h: Harmonic, amp: f64) -> Self {
        let mut factors = vec![Harmonic::One; extents.len()];
        factors[dim] = h;
        Self { extents: extents.to_vec(), terms: vec![TrigTerm { amp, factors }] }
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn ndim(&self) -> usize {
        self.extents.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    /// True when every term is a pure constant.
    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.amp == 0.0 || t.factors.iter().all(|f| *f == Harmonic::One))
    }

    /// Maximum harmonic index along each axis.
    pub fn degree_per_dim(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.extents.len()];
        for term in &self.terms {
            for (d, f) in term.factors.iter().enumerate() {
                deg[d] = deg[d].max(f.degree());
            }
        }
        deg
    }

    /// Largest harmonic index over all axes.
    pub fn degree(&self) -> u32 {
        self.degree_per_dim().into_iter().max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.extents.len());
        self.terms
            .iter()
            .map(|term| {
                let mut v = term.amp;
                for (d, f) in term.factors.iter().enumerate() {
                    v *= f.eval(TAU * x[d] / self.extents[d]);
                }
                v
            })
            .sum()
    }

    /// Exact partial derivative along `dim`.
    pub fn partial(&self, dim: usize) -> TrigPoly {
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let (scale, h) = term.factors[dim].derivative(self.extents[dim]);
            if scale == 0.0 && term.factors[dim] == Harmonic::One {
                continue;
            }
            let mut factors = term.factors.clone();
            factors[dim] = h;
            terms.push(TrigTerm { amp: term.amp * scale, factors });
        }
        TrigPoly { extents: self.extents.clone(), terms }
    }

    pub fn scaled(&self, factor: f64) -> TrigPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| TrigTerm { amp: t.amp * factor, factors: t.factors.clone() })
            .collect();
        TrigPoly { extents: self.extents.clone(), terms }
    }

    pub fn plus(&self, other: &TrigPoly) -> TrigPoly {
        assert_eq!(self.extents, other.extents);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        TrigPoly { extents: self.extents.clone(), terms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn eval_single_harmonics() {
        let ext = [TAU];
        let s = TrigPoly::axis_harmonic(&ext, 0, Harmonic::Sin(1), 1.0);
        assert!((s.eval(&[PI / 2.0]) - 1.0).abs() < 1e-15);
        assert!(s.eval(&[0.0]).abs() < 1e-15);
        let c = TrigPoly::axis_harmonic(&ext, 0, Harmonic::Cos(2), 0.5);
        assert!((c.eval(&[PI / 2.0]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn partial_matches_hand_derivative() {
        // d/dx [3 sin(2x)] = 6 cos(2x) on L = 2π
        let ext = [TAU];
        let p = TrigPoly::axis_harmonic(&ext, 0, Harmonic::Sin(2), 3.0);
        let dp = p.partial(0);
        for i in 0..17 {
            let x = TAU * i as f64 / 17.0;
            assert!((dp.eval(&[x]) - 6.0 * (2.0 * x).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn partial_respects_period_scale() {
        // On L = 4π the fundamental wavenumber is 1/2.
        let ext = [2.0 * TAU];
        let p = TrigPoly::axis_harmonic(&ext, 0, Harmonic::Cos(1), 1.0);
        let dp = p.partial(0);
        let x = 1.3;
        assert!((dp.eval(&[x]) + 0.5 * (0.5 * x).sin()).abs() < 1e-14);
    }

    #[test]
    fn constant_has_zero_partial() {
        let ext = [TAU, TAU];
        let p = TrigPoly::constant(&ext, 4.2);
        assert!(p.partial(0).is_zero());
        assert!(p.is_constant());
        assert_eq!(p.degree(), 0);
    }

    #[test]
    fn degree_tracks_max_mode() {
        let ext = [TAU, TAU];
        let p = TrigPoly::new(
            &ext,
            vec![
                TrigTerm { amp: 1.0, factors: vec![Harmonic::Cos(3), Harmonic::One] },
                TrigTerm { amp: 2.0, factors: vec![Harmonic::Sin(1), Harmonic::Sin(5)] },
            ],
        );
        assert_eq!(p.degree_per_dim(), vec![3, 5]);
        assert_eq!(p.degree(), 5);
    }
}
