//! Wavefunctions on grids: inner products, densities, and test states.

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::geometry::{fft_inverse, fft_modes};
use crate::manifold::Grid;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("state: sample count {got} does not match grid size {expected}")]
    SampleCount { expected: usize, got: usize },
    #[error("state: non-finite sample at flat index {0}")]
    NonFinite(usize),
    #[error("state: zero norm")]
    ZeroNorm,
    #[error("state: grids do not match")]
    GridMismatch,
}

/// Complex scalar samples over a [`Grid`] (trivial-bundle realization of a
/// square-integrable section).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    data: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Self, StateError> {
        if data.len() != grid.len() {
            return Err(StateError::SampleCount { expected: grid.len(), got: data.len() });
        }
        for (i, v) in data.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(StateError::NonFinite(i));
            }
        }
        let wf = Self { grid, data };
        if wf.norm_sq() <= 0.0 {
            return Err(StateError::ZeroNorm);
        }
        Ok(wf)
    }

    /// Build from a complex-valued function of coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> Result<Self, StateError> {
        let data = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid.clone(), data)
    }

    /// Normalized plane wave with integer mode numbers along each axis.
    pub fn plane_wave(grid: &Grid, modes: &[i64]) -> Result<Self, StateError> {
        assert_eq!(modes.len(), grid.ndim());
        let amp = 1.0 / grid.total_volume().sqrt();
        let extents = grid.spec().extents().to_vec();
        let modes = modes.to_vec();
        Self::from_fn(grid, |x| {
            let phase: f64 = x
                .iter()
                .zip(&modes)
                .zip(&extents)
                .map(|((xi, &m), &l)| std::f64::consts::TAU * m as f64 * xi / l)
                .sum();
            amp * Complex64::new(0.0, phase).exp()
        })
    }

    /// Smooth periodic bump `exp(Σ κ_d (cos(2π(x_d−c_d)/L_d) − 1))`,
    /// normalized. Gaussian-like for large κ but exactly periodic and
    /// nodeless for any κ.
    pub fn periodic_bump(grid: &Grid, center: &[f64], kappa: &[f64]) -> Result<Self, StateError> {
        assert_eq!(center.len(), grid.ndim());
        assert_eq!(kappa.len(), grid.ndim());
        let extents = grid.spec().extents().to_vec();
        let (center, kappa) = (center.to_vec(), kappa.to_vec());
        let wf = Self::from_fn(grid, |x| {
            let arg: f64 = x
                .iter()
                .zip(&center)
                .zip(&kappa)
                .zip(&extents)
                .map(|(((xi, &c), &k), &l)| {
                    k * ((std::f64::consts::TAU * (xi - c) / l).cos() - 1.0)
                })
                .sum();
            Complex64::new(arg.exp(), 0.0)
        })?;
        Ok(wf.normalized())
    }

    /// True Gaussian `exp(−|x−c|²/(4σ²))`, normalized on the grid. Intended
    /// for the periodic line segment with support well inside the domain;
    /// validity there is monitored through [`WaveFunction::boundary_mass`].
    pub fn gaussian(grid: &Grid, center: &[f64], sigma: &[f64]) -> Result<Self, StateError> {
        assert_eq!(center.len(), grid.ndim());
        assert_eq!(sigma.len(), grid.ndim());
        let (center, sigma) = (center.to_vec(), sigma.to_vec());
        let wf = Self::from_fn(grid, |x| {
            let arg: f64 = x
                .iter()
                .zip(&center)
                .zip(&sigma)
                .map(|((xi, &c), &s)| -(xi - c).powi(2) / (4.0 * s * s))
                .sum();
            Complex64::new(arg.exp(), 0.0)
        })?;
        Ok(wf.normalized())
    }

    /// Random band-limited state: independent uniform complex coefficients on
    /// all modes with `|m_d| ≤ max_mode`, synthesized by inverse FFT and
    /// normalized. Deterministic given the RNG state.
    pub fn random_band_limited(
        grid: &Grid,
        max_mode: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, StateError> {
        let shape = grid.shape();
        let mode_tables: Vec<Vec<i64>> = shape.iter().map(|&n| fft_modes(n)).collect();
        let mut hat = vec![Complex64::default(); grid.len()];
        for (flat, v) in hat.iter_mut().enumerate() {
            let idx = grid.multi_index(flat);
            let in_band = idx
                .iter()
                .enumerate()
                .all(|(d, &i)| mode_tables[d][i].unsigned_abs() as usize <= max_mode);
            if in_band {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        fft_inverse(&mut hat, shape);
        Ok(Self::new(grid.clone(), hat)?.normalized())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// L² inner product `⟨self, other⟩ = ∫ conj(self)·other dμ`
    /// (antilinear in the first slot).
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64, StateError> {
        if self.grid != other.grid {
            return Err(StateError::GridMismatch);
        }
        let sum: Complex64 =
            self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        Ok(sum * self.grid.cell_volume())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(&self) -> WaveFunction {
        let n = self.norm();
        let data = self.data.iter().map(|v| v / n).collect();
        Self { grid: self.grid.clone(), data }
    }

    /// Pointwise probability density `|ψ|²`.
    pub fn density(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn min_density(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_density(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// Fraction of `∫|ψ|²` carried by the outer 10% of the domain along each
    /// axis. Meaningful on the periodic line segment, where it certifies that
    /// the state keeps away from the artificial seam.
    pub fn boundary_mass(&self) -> f64 {
        let mut boundary = 0.0;
        let mut total = 0.0;
        for (flat, v) in self.data.iter().enumerate() {
            let idx = self.grid.multi_index(flat);
            let near_seam = idx.iter().enumerate().any(|(d, &i)| {
                let n = self.grid.shape()[d];
                let frac = i as f64 / n as f64;
                !(0.1..0.9).contains(&frac)
            });
            let w = v.norm_sqr();
            total += w;
            if near_seam {
                boundary += w;
            }
        }
        boundary / total
    }

    /// `max |self − other|` over the grid.
    pub fn max_abs_diff(&self, other: &WaveFunction) -> Result<f64, StateError> {
        if self.grid != other.grid {
            return Err(StateError::GridMismatch);
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// L² distance `‖self − other‖`.
    pub fn l2_distance(&self, other: &WaveFunction) -> Result<f64, StateError> {
        if self.grid != other.grid {
            return Err(StateError::GridMismatch);
        }
        let sum: f64 =
            self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((sum * self.grid.cell_volume()).sqrt())
    }

    pub fn scaled(&self, factor: Complex64) -> WaveFunction {
        let data = self.data.iter().map(|v| v * factor).collect();
        Self { grid: self.grid.clone(), data }
    }

    pub(crate) fn from_raw(grid: Grid, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }
}
