use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, L)^d` with `n` points per axis.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    table: Arc<WaveTable>,
}

/// Per-coefficient wavenumber data, laid out in FFT (row-major) order.
pub(crate) struct WaveTable {
    /// Signed physical wavevector ξ = (2π/L)k.
    pub xi: Vec<[f64; 3]>,
    /// Wavevector used by odd-order derivatives: Nyquist components are zeroed
    /// so that derivatives of real data stay real.
    pub xi_deriv: Vec<[f64; 3]>,
    /// |ξ| from the signed wavevector.
    pub norm: Vec<f64>,
    /// |ξ_deriv|².
    pub deriv_norm2: Vec<f64>,
    /// Inside the 2/3-rule retained band.
    pub retained: Vec<bool>,
    /// Flat index of −k.
    pub mirror: Vec<usize>,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Structure(format!(
                "dimension must be 1, 2 or 3 (got {dim})"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Structure(format!(
                "points per axis must be a power of two >= 8 (got {n})"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Structure(format!(
                "domain length must be positive (got {length})"
            )));
        }
        let table = Arc::new(WaveTable::build(dim, n, length));
        Ok(Self {
            dim,
            n,
            length,
            table,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of grid points (and Fourier coefficients).
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Smallest nonzero wavenumber magnitude, 2π/L.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest resolved |ξ| (the corner of the Fourier box).
    pub fn max_wavenumber(&self) -> f64 {
        self.fundamental() * (self.n / 2) as f64 * (self.dim as f64).sqrt()
    }

    /// Torus volume L^d.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Largest retained integer wavenumber per axis under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    /// Integer multi-index of flat position `idx` (signed, FFT ordering).
    pub fn mode_index(&self, idx: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            let i = rest % self.n;
            rest /= self.n;
            k[axis] = signed_index(i, self.n);
        }
        k
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut x = [0.0; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            x[axis] = (rest % self.n) as f64 * h;
            rest /= self.n;
        }
        x
    }

    pub(crate) fn table(&self) -> &WaveTable {
        &self.table
    }

    pub fn wavevector(&self, idx: usize) -> &[f64] {
        &self.table.xi[idx][..self.dim]
    }

    pub fn wavenumber_norm(&self, idx: usize) -> f64 {
        self.table.norm[idx]
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl WaveTable {
    fn build(dim: usize, n: usize, length: f64) -> Self {
        let total = n.pow(dim as u32);
        let kappa = 2.0 * PI / length;
        let cutoff = (n / 3) as i64;
        let nyq = (n / 2) as i64;
        let mut xi = Vec::with_capacity(total);
        let mut xi_deriv = Vec::with_capacity(total);
        let mut norm = Vec::with_capacity(total);
        let mut deriv_norm2 = Vec::with_capacity(total);
        let mut retained = Vec::with_capacity(total);
        let mut mirror = Vec::with_capacity(total);
        for idx in 0..total {
            let mut k = [0i64; 3];
            let mut digits = [0usize; 3];
            let mut rest = idx;
            for axis in (0..dim).rev() {
                digits[axis] = rest % n;
                rest /= n;
                k[axis] = signed_index(digits[axis], n);
            }
            let mut w = [0.0; 3];
            let mut wd = [0.0; 3];
            let mut keep = true;
            let mut m = 0usize;
            for axis in 0..dim {
                w[axis] = kappa * k[axis] as f64;
                wd[axis] = if k[axis] == nyq { 0.0 } else { w[axis] };
                keep &= k[axis].abs() <= cutoff;
                m = m * n + (n - digits[axis]) % n;
            }
            norm.push((w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt());
            deriv_norm2.push(wd[0] * wd[0] + wd[1] * wd[1] + wd[2] * wd[2]);
            xi.push(w);
            xi_deriv.push(wd);
            retained.push(keep);
            mirror.push(m);
        }
        Self {
            xi,
            xi_deriv,
            norm,
            deriv_norm2,
            retained,
            mirror,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mirror_is_involution() {
        let g = Grid::new(2, 8, 2.0 * PI).unwrap();
        for idx in 0..g.len() {
            let m = g.table().mirror[idx];
            assert_eq!(g.table().mirror[m], idx);
            let (a, b) = (g.mode_index(idx), g.mode_index(m));
            for axis in 0..2 {
                assert_eq!((a[axis] + b[axis]).rem_euclid(8), 0);
            }
        }
    }
}
