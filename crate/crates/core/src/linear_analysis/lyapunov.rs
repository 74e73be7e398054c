use crate::error::{Error, Result};
use crate::spectral::{gradient, poisson_inverse_gradient, SpectralField, VectorField};

/// Lowest `|ξ|` reached by a dyadic block with `2^j ≥ 1/2`.
pub const HIGH_FREQUENCY_FLOOR: f64 = 3.0 / 8.0;

/// `(1 − 4ε²)/5`.
pub fn lyapunov_decay_rate(eps: f64) -> f64 {
    (1.0 - 4.0 * eps * eps) / 5.0
}

fn check_high_support(u: &SpectralField, what: &str) -> Result<()> {
    let grid = u.grid();
    for (idx, c) in u.coeffs().iter().enumerate() {
        let r = grid.wavenumber_norm(idx);
        if *c != num_complex::Complex64::new(0.0, 0.0) && r < HIGH_FREQUENCY_FLOOR {
            return Err(Error::Precondition(format!(
                "{what} has content at |ξ| = {r:.4} below the high-frequency floor {HIGH_FREQUENCY_FLOOR}"
            )));
        }
    }
    Ok(())
}

/// `‖∇ϱ‖² + ‖∇v‖²`.
pub fn gradient_energy(rho: &SpectralField, v: &VectorField) -> f64 {
    gradient(rho).l2_norm_sqr()
        + v.components
            .iter()
            .map(|c| gradient(c).l2_norm_sqr())
            .sum::<f64>()
}

/// `½‖∇ϱ_j‖² + ½‖∇v_j‖² + ¼∫∇ϱ_j·v_j` for block-localised high-frequency data.
pub fn lyapunov_high(rho_j: &SpectralField, v_j: &VectorField) -> Result<f64> {
    if v_j.grid() != rho_j.grid() || v_j.dim() != rho_j.grid().dim() {
        return Err(Error::Structure("density and velocity grids differ".into()));
    }
    check_high_support(rho_j, "density")?;
    for c in &v_j.components {
        check_high_support(c, "velocity")?;
    }
    let cross = gradient(rho_j).inner(v_j);
    Ok(0.5 * gradient_energy(rho_j, v_j) + 0.25 * cross)
}

/// `W̃ = ∇ϱ + ε²∇(−Δ)⁻¹ϱ + v`; `ϱ` must be mean-free.
pub fn damped_mode_linear(rho: &SpectralField, v: &VectorField, eps: f64) -> Result<VectorField> {
    let mut w = gradient(rho);
    w.axpy(eps * eps, &poisson_inverse_gradient(rho)?);
    Ok(w.add(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_real_field, Grid};
    use std::f64::consts::PI;

    #[test]
    fn zero_velocity_leaves_half_gradient_energy() {
        let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
        let rho = random_real_field(&grid, 3, 1.0, 5.0);
        let v = VectorField::zeros(&grid);
        let l = lyapunov_high(&rho, &v).unwrap();
        assert!((l - 0.5 * gradient(&rho).l2_norm_sqr()).abs() < 1e-12 * l);
    }

    #[test]
    fn low_content_rejected() {
        let grid = Grid::new(1, 16, 32.0 * PI).unwrap();
        let rho = random_real_field(&grid, 1, 0.0, f64::INFINITY);
        let v = VectorField::zeros(&grid);
        assert!(matches!(
            lyapunov_high(&rho, &v),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn damped_mode_cancellations() {
        let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
        let v = VectorField::new(vec![
            random_real_field(&grid, 5, 0.0, f64::INFINITY),
            random_real_field(&grid, 6, 0.0, f64::INFINITY),
        ])
        .unwrap();
        let zero = SpectralField::zeros(&grid);
        let w = damped_mode_linear(&zero, &v, 0.1).unwrap();
        assert!(w.sub(&v).max_abs_coeff() == 0.0);

        let rho = random_real_field(&grid, 7, 0.0, f64::INFINITY);
        let eps = 0.2;
        let mut stationary = gradient(&rho).scaled(-1.0);
        stationary.axpy(-eps * eps, &poisson_inverse_gradient(&rho).unwrap());
        let w = damped_mode_linear(&rho, &stationary, eps).unwrap();
        assert!(w.max_abs_coeff() < 1e-15);
    }
}
