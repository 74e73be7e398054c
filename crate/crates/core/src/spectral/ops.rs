use num_complex::Complex64;

use super::field::{SpectralField, VectorField};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Largest admissible |mean| for inputs to the strict Poisson inversion.
pub const MEAN_TOLERANCE: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn forward_transform(grid: &Grid, u: &[f64]) -> Result<SpectralField> {
    SpectralField::from_physical(grid, u)
}

pub fn inverse_transform(u: &SpectralField) -> Vec<f64> {
    u.to_physical()
}

/// Component i is multiplication by iξ_i.
pub fn gradient(u: &SpectralField) -> VectorField {
    let grid = u.grid();
    let xi = &grid.table().xi_deriv;
    VectorField {
        components: (0..grid.dim())
            .map(|axis| u.map_modes(|idx| I * xi[idx][axis]))
            .collect(),
    }
}

pub fn divergence(v: &VectorField) -> SpectralField {
    let grid = v.grid();
    let xi = &grid.table().xi_deriv;
    let mut out = SpectralField::zeros(grid);
    for (axis, comp) in v.components.iter().enumerate() {
        for (idx, (o, c)) in out.coeffs_mut().iter_mut().zip(comp.coeffs()).enumerate() {
            *o += I * xi[idx][axis] * c;
        }
    }
    out
}

/// Δu = div ∇u, consistent with [`gradient`] and [`divergence`].
pub fn laplacian(u: &SpectralField) -> SpectralField {
    let k2 = &u.grid().table().deriv_norm2;
    u.map_modes(|idx| Complex64::new(-k2[idx], 0.0))
}

/// ∇V with −ΔV = u, gauge V̂(0) = 0. Fails on inputs whose mean exceeds
/// [`MEAN_TOLERANCE`].
pub fn poisson_inverse_gradient(u: &SpectralField) -> Result<VectorField> {
    let mean = u.coeffs()[0].norm();
    if mean > MEAN_TOLERANCE {
        return Err(Error::Degenerate(format!(
            "Poisson source has mean {mean:.3e}; only mean-free data has a periodic potential"
        )));
    }
    Ok(poisson_inverse_gradient_mean_free(u))
}

/// Same as [`poisson_inverse_gradient`] but silently discards the mean mode.
pub fn poisson_inverse_gradient_mean_free(u: &SpectralField) -> VectorField {
    let grid = u.grid();
    let table = grid.table();
    VectorField {
        components: (0..grid.dim())
            .map(|axis| {
                u.map_modes(|idx| {
                    let k2 = table.deriv_norm2[idx];
                    if k2 == 0.0 {
                        Complex64::default()
                    } else {
                        I * (table.xi_deriv[idx][axis] / k2)
                    }
                })
            })
            .collect(),
    }
}

/// Helmholtz split `v = Pv + Qv` with `Pv` divergence-free and `Qv` a gradient.
/// Modes with vanishing derivative wavevector (including k = 0) go to `Pv`.
pub fn helmholtz_project(v: &VectorField) -> (VectorField, VectorField) {
    let grid = v.grid();
    let table = grid.table();
    let d = grid.dim();
    let mut p = v.clone();
    let mut q = VectorField::zeros(grid);
    for idx in 0..grid.len() {
        let k2 = table.deriv_norm2[idx];
        if k2 == 0.0 {
            continue;
        }
        let xi = &table.xi_deriv[idx];
        let mut dot = Complex64::default();
        for axis in 0..d {
            dot += v.components[axis].coeffs()[idx] * xi[axis];
        }
        for axis in 0..d {
            let qv = dot * (xi[axis] / k2);
            q.components[axis].coeffs_mut()[idx] = qv;
            p.components[axis].coeffs_mut()[idx] -= qv;
        }
    }
    (p, q)
}

/// Scalar curl ∂₁v₂ − ∂₂v₁ of a planar field.
pub fn curl_2d(v: &VectorField) -> Result<SpectralField> {
    if v.dim() != 2 {
        return Err(Error::Structure(format!(
            "planar curl needs d = 2 (got {})",
            v.dim()
        )));
    }
    let xi = &v.grid().table().xi_deriv;
    let a = v.components[1].map_modes(|idx| I * xi[idx][0]);
    let b = v.components[0].map_modes(|idx| I * xi[idx][1]);
    Ok(a.sub(&b))
}

/// Pointwise product formed in physical space and truncated by the 2/3 rule.
pub fn multiply(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let pa = a.to_physical();
    let pb = b.to_physical();
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    SpectralField::from_physical(a.grid(), &prod)
        .expect("same grid")
        .dealiased()
}
