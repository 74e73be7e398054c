use num_complex::Complex64;

use super::fft::fft_nd;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Fourier coefficients of a (normally real-valued) periodic field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Structure(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Forward transform of physical samples (row-major, `n^d` values).
    pub fn from_physical(grid: &Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Structure(format!(
                "expected {} physical samples on a {}-d grid with n = {}, got {}",
                grid.len(),
                grid.dim(),
                grid.n(),
                values.len()
            )));
        }
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut coeffs, grid.dim(), grid.n(), false);
        let scale = 1.0 / grid.len() as f64;
        coeffs.iter_mut().for_each(|c| *c *= scale);
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Build the field whose physical samples are `f(x)`.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len())
            .map(|idx| f(&grid.point(idx)[..grid.dim()]))
            .collect();
        Self::from_physical(grid, &values).expect("sample count matches grid")
    }

    /// Inverse transform; returns the real part of the physical samples.
    pub fn to_physical(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        fft_nd(&mut data, self.grid.dim(), self.grid.n(), true);
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Spatial mean (the k = 0 coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `∫|u|²` over the torus, computed spectrally.
    pub fn l2_norm_sqr(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sqr().sqrt()
    }

    /// Real L² inner product `∫ u·w` for real-data fields.
    pub fn inner(&self, other: &Self) -> f64 {
        self.grid.volume()
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Multiply every coefficient by `m(idx)`.
    pub fn map_modes(&self, m: impl Fn(usize) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| c * m(idx))
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_modes(|_| Complex64::new(s, 0.0))
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += xv * a;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Zero the modes outside the 2/3-rule band.
    pub fn dealias(&mut self) {
        let retained = &self.grid.table().retained;
        for (c, keep) in self.coeffs.iter_mut().zip(retained) {
            if !keep {
                *c = Complex64::default();
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    /// Project onto conjugate-symmetric coefficients (real physical data).
    pub fn symmetrize(&mut self) {
        let mirror = &self.grid.table().mirror;
        let old = self.coeffs.clone();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            *c = 0.5 * (old[idx] + old[mirror[idx]].conj());
        }
    }

    /// Largest violation of `û(−ξ) = conj(û(ξ))`.
    pub fn hermitian_defect(&self) -> f64 {
        let mirror = &self.grid.table().mirror;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| (c - self.coeffs[mirror[idx]].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Remove the mean (k = 0) mode.
    pub fn remove_mean(&mut self) {
        self.coeffs[0] = Complex64::default();
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// A d-component vector field, one [`SpectralField`] per axis.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub components: Vec<SpectralField>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            components: (0..grid.dim())
                .map(|_| SpectralField::zeros(grid))
                .collect(),
        }
    }

    pub fn new(components: Vec<SpectralField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Structure("vector field needs components".into()));
        };
        let grid = first.grid().clone();
        if components.len() != grid.dim() || components.iter().any(|c| c.grid() != &grid) {
            return Err(Error::Structure(format!(
                "vector field needs {} components on a common grid",
                grid.dim()
            )));
        }
        Ok(Self { components })
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn l2_norm_sqr(&self) -> f64 {
        self.components.iter().map(SpectralField::l2_norm_sqr).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sqr().sqrt()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scaled(s)).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, xv) in self.components.iter_mut().zip(&x.components) {
            y.axpy(a, xv);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn dealias(&mut self) {
        self.components.iter_mut().for_each(SpectralField::dealias);
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.components
            .iter()
            .map(SpectralField::max_abs_coeff)
            .fold(0.0, f64::max)
    }

    /// Pointwise maximum of |v| on the physical grid.
    pub fn max_speed(&self) -> f64 {
        let phys: Vec<Vec<f64>> = self.components.iter().map(|c| c.to_physical()).collect();
        (0..self.grid().len())
            .map(|i| phys.iter().map(|p| p[i] * p[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(SpectralField::is_finite)
    }
}
