//! Flat periodic configuration manifolds and their uniform grids.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("manifold: extent {0} must be strictly positive, got {1}")]
    NonPositiveExtent(usize, f64),
    #[error("manifold: metric entry {0} must be strictly positive, got {1}")]
    NonPositiveMetric(usize, f64),
    #[error("manifold: {kind:?} is {expected}-dimensional, got {got} extents")]
    DimensionMismatch { kind: ManifoldKind, expected: usize, got: usize },
    #[error("grid: points per dimension must be a power of two >= 4, got {0}")]
    BadGridSize(usize),
}

/// Supported manifold topologies. All are periodic at grid level; the
/// line segment is a truncation device whose physical validity is
/// monitored through the boundary-mass diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Circle,
    Torus2,
    LineSegment,
}

impl ManifoldKind {
    pub fn ndim(self) -> usize {
        match self {
            ManifoldKind::Circle | ManifoldKind::LineSegment => 1,
            ManifoldKind::Torus2 => 2,
        }
    }

    /// Closed manifolds carry no boundary seam to monitor.
    pub fn is_closed(self) -> bool {
        !matches!(self, ManifoldKind::LineSegment)
    }
}

/// A flat manifold with constant diagonal metric. The metric entries absorb
/// particle masses, so no separate mass parameter appears anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    extents: Vec<f64>,
    metric_diag: Vec<f64>,
}

impl ManifoldSpec {
    pub fn new(
        kind: ManifoldKind,
        extents: Vec<f64>,
        metric_diag: Vec<f64>,
    ) -> Result<Self, ManifoldError> {
        if extents.len() != kind.ndim() {
            return Err(ManifoldError::DimensionMismatch {
                kind,
                expected: kind.ndim(),
                got: extents.len(),
            });
        }
        if metric_diag.len() != kind.ndim() {
            return Err(ManifoldError::DimensionMismatch {
                kind,
                expected: kind.ndim(),
                got: metric_diag.len(),
            });
        }
        for (d, &l) in extents.iter().enumerate() {
            if !(l > 0.0) {
                return Err(ManifoldError::NonPositiveExtent(d, l));
            }
        }
        for (d, &g) in metric_diag.iter().enumerate() {
            if !(g > 0.0) {
                return Err(ManifoldError::NonPositiveMetric(d, g));
            }
        }
        Ok(Self { kind, extents, metric_diag })
    }

    /// Unit-metric circle of circumference `length`.
    pub fn circle(length: f64) -> Result<Self, ManifoldError> {
        Self::new(ManifoldKind::Circle, vec![length], vec![1.0])
    }

    /// Unit-metric square 2-torus.
    pub fn torus2(l1: f64, l2: f64) -> Result<Self, ManifoldError> {
        Self::new(ManifoldKind::Torus2, vec![l1, l2], vec![1.0, 1.0])
    }

    /// Periodic truncation of the line, length `length`.
    pub fn line_segment(length: f64) -> Result<Self, ManifoldError> {
        Self::new(ManifoldKind::LineSegment, vec![length], vec![1.0])
    }

    pub fn with_metric(mut self, metric_diag: Vec<f64>) -> Result<Self, ManifoldError> {
        if metric_diag.len() != self.kind.ndim() {
            return Err(ManifoldError::DimensionMismatch {
                kind: self.kind,
                expected: self.kind.ndim(),
                got: metric_diag.len(),
            });
        }
        for (d, &g) in metric_diag.iter().enumerate() {
            if !(g > 0.0) {
                return Err(ManifoldError::NonPositiveMetric(d, g));
            }
        }
        self.metric_diag = metric_diag;
        Ok(self)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn ndim(&self) -> usize {
        self.kind.ndim()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn metric_diag(&self) -> &[f64] {
        &self.metric_diag
    }

    /// Inverse metric entries `g^{dd} = 1/g_dd`.
    pub fn metric_inv(&self) -> Vec<f64> {
        self.metric_diag.iter().map(|g| 1.0 / g).collect()
    }

    /// `√det g` for the diagonal metric.
    pub fn sqrt_det_g(&self) -> f64 {
        self.metric_diag.iter().product::<f64>().sqrt()
    }

    /// Wrap a coordinate vector into the fundamental domain `[0, L_d)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for (xd, &l) in x.iter_mut().zip(&self.extents) {
            *xd = xd.rem_euclid(l);
        }
    }
}

/// Uniform sampling grid over a [`ManifoldSpec`]. Row-major storage order;
/// last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: ManifoldSpec,
    shape: Vec<usize>,
    coordinates: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(spec: ManifoldSpec, shape: Vec<usize>) -> Result<Self, ManifoldError> {
        if shape.len() != spec.ndim() {
            return Err(ManifoldError::DimensionMismatch {
                kind: spec.kind(),
                expected: spec.ndim(),
                got: shape.len(),
            });
        }
        for &n in &shape {
            if n < 4 || !n.is_power_of_two() {
                return Err(ManifoldError::BadGridSize(n));
            }
        }
        let coordinates = shape
            .iter()
            .zip(spec.extents())
            .map(|(&n, &l)| (0..n).map(|i| i as f64 * l / n as f64).collect())
            .collect();
        Ok(Self { spec, shape, coordinates })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn kind(&self) -> ManifoldKind {
        self.spec.kind()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sample coordinates along axis `d`.
    pub fn coordinates(&self, d: usize) -> &[f64] {
        &self.coordinates[d]
    }

    /// Grid spacing along axis `d`.
    pub fn spacing(&self, d: usize) -> f64 {
        self.spec.extents()[d] / self.shape[d] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.ndim()).map(|d| self.spacing(d)).fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weight of one cell w.r.t. the metric volume measure.
    pub fn cell_volume(&self) -> f64 {
        self.cell_coord_volume() * self.spec.sqrt_det_g()
    }

    /// Coordinate cell volume `∏ L_d/N_d` without the metric factor; this is
    /// the weight for integrating differential forms.
    pub fn cell_coord_volume(&self) -> f64 {
        (0..self.ndim()).map(|d| self.spacing(d)).product()
    }

    /// Total measure of the manifold, `∏ L_d · √det g`.
    pub fn total_volume(&self) -> f64 {
        self.spec.extents().iter().product::<f64>() * self.spec.sqrt_det_g()
    }

    /// Flat index of the multi-index `idx`.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (d, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[d]);
            flat = flat * self.shape[d] + i;
        }
        flat
    }

    /// Multi-index of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.ndim()];
        for d in (0..self.ndim()).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    /// Coordinates of a flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.coordinates[d][i])
            .collect()
    }

    /// Sample a real function of coordinates over the grid.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn rejects_bad_inputs() {
        assert!(ManifoldSpec::circle(-1.0).is_err());
        assert!(ManifoldSpec::new(ManifoldKind::Torus2, vec![TAU], vec![1.0]).is_err());
        assert!(ManifoldSpec::circle(TAU).unwrap().with_metric(vec![0.0]).is_err());
        let spec = ManifoldSpec::circle(TAU).unwrap();
        assert!(Grid::new(spec.clone(), vec![3]).is_err());
        assert!(Grid::new(spec, vec![48]).is_err());
    }

    #[test]
    fn total_quadrature_weight_matches_measure() {
        let spec = ManifoldSpec::torus2(TAU, 2.0 * TAU)
            .unwrap()
            .with_metric(vec![4.0, 1.0])
            .unwrap();
        let grid = Grid::new(spec, vec![8, 16]).unwrap();
        let total = grid.cell_volume() * grid.len() as f64;
        // ∏ L_d √det g = 2π·4π·2
        assert!((total - grid.total_volume()).abs() < 1e-12 * total);
        assert!((grid.total_volume() - TAU * 2.0 * TAU * 2.0).abs() < 1e-12);
    }

    #[test]
    fn indexing_round_trips() {
        let spec = ManifoldSpec::torus2(TAU, TAU).unwrap();
        let grid = Grid::new(spec, vec![8, 4]).unwrap();
        for flat in 0..grid.len() {
            let idx = grid.multi_index(flat);
            assert_eq!(grid.flat_index(&idx), flat);
        }
        assert_eq!(grid.flat_index(&[1, 2]), 6);
    }

    #[test]
    fn wrap_reduces_into_fundamental_domain() {
        let spec = ManifoldSpec::circle(TAU).unwrap();
        let mut x = [TAU + 1.0];
        spec.wrap(&mut x);
        assert!((x[0] - 1.0).abs() < 1e-12);
        let mut y = [-0.5];
        spec.wrap(&mut y);
        assert!((y[0] - (TAU - 0.5)).abs() < 1e-12);
    }
}
