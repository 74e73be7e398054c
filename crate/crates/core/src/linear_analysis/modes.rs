use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{expm, phi_functions, LinearCoefficients, I};
use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, VectorField};

/// One Fourier mode `(ϱ̂, v̂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeState {
    pub rho: Complex64,
    pub v: Vec<Complex64>,
}

impl ModeState {
    pub fn new(rho: Complex64, v: Vec<Complex64>) -> Self {
        Self { rho, v }
    }

    pub fn to_vector(&self) -> DVector<Complex64> {
        DVector::from_iterator(
            self.v.len() + 1,
            std::iter::once(self.rho).chain(self.v.iter().copied()),
        )
    }

    pub fn from_vector(z: &DVector<Complex64>) -> Self {
        Self {
            rho: z[0],
            v: z.iter().skip(1).copied().collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.rho.norm_sqr() + self.v.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `û = iξ·v̂`.
    pub fn divergence(&self, xi: &[f64]) -> Complex64 {
        I * xi
            .iter()
            .zip(&self.v)
            .map(|(x, c)| c * x)
            .sum::<Complex64>()
    }
}

/// Exact evolution of a single mode in the normalised frame.
#[derive(Clone, Debug)]
pub struct ModeSolution {
    pub xi: Vec<f64>,
    pub eps: f64,
    pub t: f64,
    pub initial: ModeState,
    pub evolved: ModeState,
}

impl ModeSolution {
    /// `ŵ = û/√(|ξ|² + ε²)`.
    pub fn w(&self, state: &ModeState) -> Complex64 {
        let s: f64 = self.xi.iter().map(|x| x * x).sum::<f64>() + self.eps * self.eps;
        state.divergence(&self.xi) / s.sqrt()
    }

    pub fn w_initial(&self) -> Complex64 {
        self.w(&self.initial)
    }

    pub fn w_evolved(&self) -> Complex64 {
        self.w(&self.evolved)
    }

    /// `|(ϱ̂, ŵ)|` of the evolved state.
    pub fn reduced_norm(&self) -> f64 {
        self.evolved.rho.norm().hypot(self.w_evolved().norm())
    }
}

/// `exp(−tM(ξ))`.
pub fn mode_propagator(
    coeffs: &LinearCoefficients,
    xi: &[f64],
    t: f64,
) -> Result<DMatrix<Complex64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Precondition(format!(
            "time must be nonnegative (got {t})"
        )));
    }
    let m = coeffs.symbol(xi)?;
    Ok(expm(&(m * Complex64::new(-t, 0.0))))
}

pub fn evolve_mode_with(
    coeffs: &LinearCoefficients,
    z0: &ModeState,
    xi: &[f64],
    t: f64,
) -> Result<ModeState> {
    if z0.v.len() != xi.len() {
        return Err(Error::Structure(format!(
            "mode has {} velocity components but ξ has {}",
            z0.v.len(),
            xi.len()
        )));
    }
    let p = mode_propagator(coeffs, xi, t)?;
    Ok(ModeState::from_vector(&(p * z0.to_vector())))
}

pub fn evolve_mode(z0: &ModeState, xi: &[f64], eps: f64, t: f64) -> Result<ModeSolution> {
    super::check_eps(eps)?;
    let evolved = evolve_mode_with(&LinearCoefficients::normalized(eps), z0, xi, t)?;
    Ok(ModeSolution {
        xi: xi.to_vec(),
        eps,
        t,
        initial: z0.clone(),
        evolved,
    })
}

/// A linear map on one mode that commutes with rotations about ξ: a 2×2 block
/// on `(ϱ̂, k̂·v̂)` and a scalar on the transverse velocity.
#[derive(Clone, Copy, Debug)]
pub struct ShellOperator {
    pub longitudinal: [[Complex64; 2]; 2],
    pub transverse: f64,
}

impl ShellOperator {
    /// Applies the map in place. `khat` is the unit direction of ξ, or `None`
    /// at ξ = 0 where the velocity is purely transverse.
    #[inline]
    pub fn apply(&self, khat: Option<&[f64]>, rho: &mut Complex64, v: &mut [Complex64]) {
        let l = &self.longitudinal;
        match khat {
            Some(k) => {
                let q: Complex64 = k.iter().zip(v.iter()).map(|(a, c)| c * a).sum();
                let rho_new = l[0][0] * *rho + l[0][1] * q;
                let q_new = l[1][0] * *rho + l[1][1] * q;
                for (c, &a) in v.iter_mut().zip(k) {
                    *c = (*c - q * a) * self.transverse + q_new * a;
                }
                *rho = rho_new;
            }
            None => {
                *rho *= l[0][0];
                for c in v.iter_mut() {
                    *c *= self.transverse;
                }
            }
        }
    }
}

/// `e^{hL}`, `φ₁(hL)` and `φ₂(hL)` on a shell `|ξ|² = k2`.
#[derive(Clone, Copy, Debug)]
pub struct ShellPropagator {
    pub exp: ShellOperator,
    pub phi1: ShellOperator,
    pub phi2: ShellOperator,
}

fn to_array(m: &DMatrix<Complex64>) -> [[Complex64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn generator(coeffs: &LinearCoefficients, k2: f64, h: f64) -> DMatrix<Complex64> {
    let g = if k2 > 0.0 {
        coeffs.longitudinal_generator(k2)
    } else {
        let zero = Complex64::new(0.0, 0.0);
        [[zero, zero], [zero, Complex64::new(-coeffs.damping, 0.0)]]
    };
    DMatrix::from_fn(2, 2, |i, j| g[i][j] * h)
}

pub fn shell_propagator(coeffs: &LinearCoefficients, k2: f64, h: f64) -> ShellPropagator {
    let (e, p1, p2) = phi_functions(&generator(coeffs, k2, h));
    let (te, tp1, tp2) = phi_functions(&DMatrix::from_element(1, 1, -coeffs.damping * h));
    ShellPropagator {
        exp: ShellOperator {
            longitudinal: to_array(&e),
            transverse: te[(0, 0)],
        },
        phi1: ShellOperator {
            longitudinal: to_array(&p1),
            transverse: tp1[(0, 0)],
        },
        phi2: ShellOperator {
            longitudinal: to_array(&p2),
            transverse: tp2[(0, 0)],
        },
    }
}

fn shell_exponential(coeffs: &LinearCoefficients, k2: f64, t: f64) -> ShellOperator {
    ShellOperator {
        longitudinal: to_array(&expm(&generator(coeffs, k2, t))),
        transverse: (-coeffs.damping * t).exp(),
    }
}

/// Grouping of grid modes into shells of equal `|ξ_deriv|²`, with the unit
/// direction of every mode. Built once per grid.
#[derive(Clone, Debug)]
pub struct ShellIndex {
    /// Shell id of each flat mode index.
    pub shell_of: Vec<u32>,
    /// `|ξ|²` of each shell, ascending.
    pub k2: Vec<f64>,
    /// Unit direction of each mode (zeros where `ξ = 0`).
    pub khat: Vec<[f64; 3]>,
}

impl ShellIndex {
    pub fn new(grid: &Grid) -> Self {
        let table = grid.table();
        let mut k2: Vec<f64> = table.deriv_norm2.clone();
        k2.sort_by(f64::total_cmp);
        k2.dedup();
        let lookup: HashMap<u64, u32> = k2
            .iter()
            .enumerate()
            .map(|(i, v)| (v.to_bits(), i as u32))
            .collect();
        let shell_of = table
            .deriv_norm2
            .iter()
            .map(|v| lookup[&v.to_bits()])
            .collect();
        let khat = table
            .xi_deriv
            .iter()
            .zip(&table.deriv_norm2)
            .map(|(x, &q)| {
                if q > 0.0 {
                    let k = q.sqrt();
                    [x[0] / k, x[1] / k, x[2] / k]
                } else {
                    [0.0; 3]
                }
            })
            .collect();
        Self { shell_of, k2, khat }
    }

    pub fn shell_count(&self) -> usize {
        self.k2.len()
    }

    /// Direction of mode `idx` in `d` dimensions, `None` at `ξ = 0`.
    #[inline]
    pub fn direction(&self, idx: usize, d: usize) -> Option<&[f64]> {
        if self.k2[self.shell_of[idx] as usize] > 0.0 {
            Some(&self.khat[idx][..d])
        } else {
            None
        }
    }

    /// ETD propagators for step `h`, one per shell.
    pub fn propagators(&self, coeffs: &LinearCoefficients, h: f64) -> Vec<ShellPropagator> {
        self.k2
            .par_iter()
            .map(|&q| shell_propagator(coeffs, q, h))
            .collect()
    }
}

/// Exact linear evolution of whole fields over time `t`, mode by mode, using
/// the derivative wavevector. At `ξ = 0` the density is constant and the
/// velocity decays at the damping rate.
pub fn evolve_linear_fields(
    coeffs: &LinearCoefficients,
    rho: &SpectralField,
    v: &VectorField,
    t: f64,
) -> Result<(SpectralField, VectorField)> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Precondition(format!(
            "time must be nonnegative (got {t})"
        )));
    }
    let grid = rho.grid();
    if v.grid() != grid || v.dim() != grid.dim() {
        return Err(Error::Structure("density and velocity grids differ".into()));
    }
    let shells = ShellIndex::new(grid);
    let ops: Vec<ShellOperator> = shells
        .k2
        .iter()
        .map(|&q| shell_exponential(coeffs, q, t))
        .collect();
    let d = grid.dim();
    let mut rho_out = rho.clone();
    let mut v_out = v.clone();
    let mut vm = [Complex64::new(0.0, 0.0); 3];
    for idx in 0..grid.len() {
        for (a, c) in vm.iter_mut().zip(&v_out.components) {
            *a = c.coeffs()[idx];
        }
        let mut r = rho_out.coeffs()[idx];
        ops[shells.shell_of[idx] as usize].apply(shells.direction(idx, d), &mut r, &mut vm[..d]);
        rho_out.coeffs_mut()[idx] = r;
        for (a, c) in vm.iter().zip(v_out.components.iter_mut()) {
            c.coeffs_mut()[idx] = *a;
        }
    }
    Ok((rho_out, v_out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_time_is_identity() {
        let z0 = ModeState::new(c(0.3, -0.2), vec![c(1.0, 0.5), c(-0.7, 0.1)]);
        let sol = evolve_mode(&z0, &[0.4, 1.3], 0.1, 0.0).unwrap();
        assert_eq!(sol.evolved, z0);
    }

    #[test]
    fn transverse_velocity_decays_exponentially() {
        let xi = [0.6, 0.8];
        let z0 = ModeState::new(c(0.0, 0.0), vec![c(-0.8, 0.3), c(0.6, -0.225)]);
        for t in [0.5, 2.0, 7.0] {
            let sol = evolve_mode(&z0, &xi, 0.2, t).unwrap();
            let ratio = sol.evolved.norm() / z0.norm();
            assert!((ratio - (-t as f64).exp()).abs() < 1e-13);
            assert!(sol.evolved.rho.norm() < 1e-14);
        }
    }

    #[test]
    fn negative_time_rejected() {
        let z0 = ModeState::new(c(1.0, 0.0), vec![c(0.0, 0.0)]);
        assert!(matches!(
            evolve_mode(&z0, &[1.0], 0.1, -1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn shell_operator_matches_full_symbol() {
        let coeffs = LinearCoefficients {
            mass: 1.3,
            pressure: 0.7,
            poisson: 2.0,
            damping: 4.0,
        };
        let xi = [0.9, -0.4, 0.2];
        let k2: f64 = xi.iter().map(|x| x * x).sum();
        let khat: Vec<f64> = xi.iter().map(|x| x / k2.sqrt()).collect();
        let z0 = ModeState::new(c(0.2, 0.1), vec![c(1.0, -0.5), c(0.3, 0.0), c(-0.2, 0.4)]);
        let t = 0.37;
        let full = evolve_mode_with(&coeffs, &z0, &xi, t).unwrap();
        let op = shell_exponential(&coeffs, k2, t);
        let mut r = z0.rho;
        let mut v = z0.v.clone();
        op.apply(Some(&khat), &mut r, &mut v);
        let shell = ModeState::new(r, v);
        let err = ModeState::from_vector(&(full.to_vector() - shell.to_vector())).norm();
        assert!(err < 1e-13, "{err}");
        let prop = shell_propagator(&coeffs, k2, t);
        for (a, b) in prop
            .exp
            .longitudinal
            .iter()
            .flatten()
            .zip(op.longitudinal.iter().flatten())
        {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
