//! Exact per-Fourier-mode analysis of the linearised damped Euler–Poisson
//! system
//!
//! ```text
//! ∂ₜϱ + a div v = 0,
//! ∂ₜv + b∇ϱ + e∇(−Δ)⁻¹ϱ + c v = 0,
//! ```
//!
//! which in Fourier variables reads `dz/dt = −M(ξ) z` for `z = (ϱ̂, v̂)` and
//! `M = [[0, iaξᵀ], [i(b + e|ξ|⁻²)ξ, c I_d]]`. The normalised frame has
//! `a = b = c = 1`, `e = ε²`.

mod certify;
mod expm;
mod lyapunov;
mod modes;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use certify::{
    certify_low_frequency_decay, default_sweep, low_frequency_bound, CertificationReport,
    CertificationRow, DecaySample, CERTIFICATION_CSV_HEADER, LOW_FREQUENCY_CONSTANT,
};
pub use expm::{expm, phi_functions};
pub use lyapunov::{
    damped_mode_linear, gradient_energy, lyapunov_decay_rate, lyapunov_high, HIGH_FREQUENCY_FLOOR,
};
pub use modes::{
    evolve_linear_fields, evolve_mode, evolve_mode_with, mode_propagator, shell_propagator,
    ModeSolution, ModeState, ShellIndex, ShellOperator, ShellPropagator,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Coefficients `(a, b, e, c)` of the linear system in the module docs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearCoefficients {
    /// `a`, multiplies `div v` in the density equation.
    pub mass: f64,
    /// `b`, multiplies `∇ϱ`.
    pub pressure: f64,
    /// `e`, multiplies `∇(−Δ)⁻¹ϱ`.
    pub poisson: f64,
    /// `c`, the damping rate.
    pub damping: f64,
}

impl LinearCoefficients {
    pub fn normalized(eps: f64) -> Self {
        Self {
            mass: 1.0,
            pressure: 1.0,
            poisson: eps * eps,
            damping: 1.0,
        }
    }

    /// `M(ξ)` for this coefficient set.
    pub fn symbol(&self, xi: &[f64]) -> Result<DMatrix<Complex64>> {
        let k2: f64 = xi.iter().map(|x| x * x).sum();
        if xi.is_empty() || k2 == 0.0 {
            return Err(Error::SingularMode(
                "the symbol is undefined at ξ = 0".into(),
            ));
        }
        let d = xi.len();
        let lower = self.pressure + self.poisson / k2;
        let mut m = DMatrix::zeros(d + 1, d + 1);
        for (i, &x) in xi.iter().enumerate() {
            m[(0, i + 1)] = I * (self.mass * x);
            m[(i + 1, 0)] = I * (lower * x);
            m[(i + 1, i + 1)] = Complex64::new(self.damping, 0.0);
        }
        Ok(m)
    }

    /// Generator of `d/dt (ϱ̂, k̂·v̂)` on a shell `|ξ|² = k2 > 0`.
    pub fn longitudinal_generator(&self, k2: f64) -> [[Complex64; 2]; 2] {
        let k = k2.sqrt();
        [
            [Complex64::new(0.0, 0.0), -I * (self.mass * k)],
            [
                -I * (self.pressure * k + self.poisson / k),
                Complex64::new(-self.damping, 0.0),
            ],
        ]
    }
}

/// The normalised-frame symbol of a single wavevector.
#[derive(Clone, Debug)]
pub struct SymbolMatrix {
    pub xi: Vec<f64>,
    pub eps: f64,
    pub entries: DMatrix<Complex64>,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "ε must be nonnegative (got {eps})"
        )))
    }
}

pub fn symbol_matrix(xi: &[f64], eps: f64) -> Result<SymbolMatrix> {
    check_eps(eps)?;
    let entries = LinearCoefficients::normalized(eps).symbol(xi)?;
    Ok(SymbolMatrix {
        xi: xi.to_vec(),
        eps,
        entries,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumKind {
    /// `|ξ|² + ε² < 1/4`: two distinct real eigenvalues in (0, 1).
    Overdamped,
    /// `|ξ|² + ε² = 1/4`: double eigenvalue 1/2.
    Critical,
    /// `|ξ|² + ε² > 1/4`: complex-conjugate pair.
    Underdamped,
}

/// Spectrum of the normalised symbol: `1` with multiplicity `d − 1` plus λ±.
#[derive(Clone, Debug)]
pub struct Eigenvalues {
    pub dim: usize,
    pub plus: Complex64,
    pub minus: Complex64,
    pub kind: SpectrumKind,
}

impl Eigenvalues {
    pub fn unit_multiplicity(&self) -> usize {
        self.dim - 1
    }

    /// All `d + 1` eigenvalues with multiplicity.
    pub fn all(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(1.0, 0.0); self.dim - 1];
        out.push(self.plus);
        out.push(self.minus);
        out
    }

    /// Real part of λ± in the underdamped regime is 1/2, not 1.
    pub fn note(&self) -> Option<String> {
        match self.kind {
            SpectrumKind::Underdamped => Some(format!(
                "Re λ± = {} from the closed form; a real part of 1 is not attained",
                self.plus.re
            )),
            _ => None,
        }
    }
}

/// λ± = ½(1 ± √(1 − 4(|ξ|² + ε²))).
pub fn eigenvalues(xi: &[f64], eps: f64) -> Result<Eigenvalues> {
    check_eps(eps)?;
    let k2: f64 = xi.iter().map(|x| x * x).sum();
    if xi.is_empty() || k2 == 0.0 {
        return Err(Error::SingularMode("eigenvalues requested at ξ = 0".into()));
    }
    let s = k2 + eps * eps;
    let disc = 1.0 - 4.0 * s;
    let (plus, minus, kind) = if disc > 0.0 {
        let root = disc.sqrt();
        // λ₋ through λ₊λ₋ = s avoids cancellation for small s
        let plus = 0.5 * (1.0 + root);
        (
            Complex64::new(plus, 0.0),
            Complex64::new(s / plus, 0.0),
            SpectrumKind::Overdamped,
        )
    } else if disc == 0.0 {
        let half = Complex64::new(0.5, 0.0);
        (half, half, SpectrumKind::Critical)
    } else {
        let im = 0.5 * (-disc).sqrt();
        (
            Complex64::new(0.5, im),
            Complex64::new(0.5, -im),
            SpectrumKind::Underdamped,
        )
    };
    Ok(Eigenvalues {
        dim: xi.len(),
        plus,
        minus,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_euler_symbol_in_one_dimension() {
        let m = symbol_matrix(&[1.0], 0.0).unwrap().entries;
        assert_eq!(m[(0, 0)], Complex64::new(0.0, 0.0));
        assert_eq!(m[(0, 1)], I);
        assert_eq!(m[(1, 0)], I);
        assert_eq!(m[(1, 1)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn poisson_correction_entry() {
        let m = symbol_matrix(&[1.0, 0.0], 0.1).unwrap().entries;
        assert!((m[(1, 0)] - I * 1.01).norm() < 1e-15);
        assert_eq!(m[(2, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zero_wavevector_is_singular() {
        assert!(matches!(
            symbol_matrix(&[0.0, 0.0], 0.1),
            Err(Error::SingularMode(_))
        ));
        assert!(matches!(
            eigenvalues(&[0.0], 0.1),
            Err(Error::SingularMode(_))
        ));
    }

    #[test]
    fn overdamped_example() {
        let ev = eigenvalues(&[0.3], 0.1).unwrap();
        assert_eq!(ev.kind, SpectrumKind::Overdamped);
        assert!((ev.plus.re - 0.887_298_334_620_741_7).abs() < 1e-12);
        assert!((ev.minus.re - 0.112_701_665_379_258_3).abs() < 1e-12);
        assert!(ev.note().is_none());
    }

    #[test]
    fn critical_double_root() {
        let ev = eigenvalues(&[0.5], 0.0).unwrap();
        assert_eq!(ev.kind, SpectrumKind::Critical);
        assert_eq!(ev.plus, ev.minus);
        assert_eq!(ev.plus, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn unit_eigenvalue_multiplicity() {
        let ev = eigenvalues(&[0.4, -1.2, 0.7], 0.2).unwrap();
        assert_eq!(ev.unit_multiplicity(), 2);
        let ones = ev
            .all()
            .iter()
            .filter(|z| **z == Complex64::new(1.0, 0.0))
            .count();
        assert_eq!(ones, 2);
        assert_eq!(ev.kind, SpectrumKind::Underdamped);
        assert_eq!(ev.plus.re, 0.5);
        assert!(ev.note().is_some());
    }

    #[test]
    fn characteristic_polynomial_vanishes() {
        let xi = [0.7, -0.4];
        let eps = 0.15;
        let m = symbol_matrix(&xi, eps).unwrap().entries;
        let ev = eigenvalues(&xi, eps).unwrap();
        for lam in [ev.plus, ev.minus] {
            let shifted = &m - DMatrix::identity(3, 3) * lam;
            assert!(shifted.determinant().norm() < 1e-10);
        }
    }
}
