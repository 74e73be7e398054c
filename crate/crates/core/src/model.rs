use crate::error::{Error, Result};

/// Physical parameters shared by the Euler–Poisson and Keller–Segel models.
///
/// Pressure law `P(z) = A z^γ`; `ε` is the relaxation parameter (inverse
/// damping coefficient in the original frame).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub a: f64,
    pub gamma: f64,
    pub rho_bar: f64,
    pub epsilon: f64,
}

/// Largest relaxation parameter covered by the global existence theory.
pub const EPSILON_MAX: f64 = 0.5;

impl ModelParams {
    pub fn new(a: f64, gamma: f64, rho_bar: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            a,
            gamma,
            rho_bar,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::ConfigKey {
                key: key.into(),
                message,
            })
        };
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad("A", format!("A must be > 0 (got {})", self.a));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad("gamma", format!("gamma must be > 1 (got {})", self.gamma));
        }
        if !(self.rho_bar > 0.0 && self.rho_bar.is_finite()) {
            return bad(
                "rho_bar",
                format!("rho_bar must be > 0 (got {})", self.rho_bar),
            );
        }
        if !(self.epsilon > 0.0) {
            return bad(
                "epsilon",
                format!("epsilon must be > 0 (got {})", self.epsilon),
            );
        }
        if self.epsilon > EPSILON_MAX {
            return bad("epsilon", "epsilon must be ≤ 0.5".to_string());
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.a, self.gamma, self.rho_bar, epsilon)
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }

    pub fn pressure_prime(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 1.0)
    }

    /// P′(ϱ̄).
    pub fn sound_speed_sqr(&self) -> f64 {
        self.pressure_prime(self.rho_bar)
    }

    /// Enthalpy `h` with `∇h(ρ) = ∇P(ρ)/ρ`.
    pub fn enthalpy(&self, rho: f64) -> f64 {
        self.a * self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
    }

    /// h′(ϱ̄) = P′(ϱ̄)/ϱ̄.
    pub fn enthalpy_slope(&self) -> f64 {
        self.sound_speed_sqr() / self.rho_bar
    }

    /// γ̃ = (γ − 1)/2.
    pub fn gamma_tilde(&self) -> f64 {
        0.5 * (self.gamma - 1.0)
    }

    /// Prefactor (γA)^{1/2}/γ̃ of the Makino variable.
    pub fn makino_constant(&self) -> f64 {
        (self.gamma * self.a).sqrt() / self.gamma_tilde()
    }

    /// c̄, the Makino variable of the background density.
    pub fn c_bar(&self) -> f64 {
        self.makino_constant() * self.rho_bar.powf(self.gamma_tilde())
    }

    /// Density as a function of the Makino variable, `f(c) = (c/K)^{1/γ̃}`.
    pub fn density_of_makino(&self, c: f64) -> f64 {
        (c / self.makino_constant()).powf(1.0 / self.gamma_tilde())
    }

    /// ε′ = √(f(c̄)) ε of the symmetrised system.
    pub fn epsilon_symmetrized(&self) -> f64 {
        self.density_of_makino(self.c_bar()).sqrt() * self.epsilon
    }

    /// ε′ = ε/√P′(ϱ̄), the relaxation parameter after normalising P′(ϱ̄) to 1.
    pub fn epsilon_normalized(&self) -> f64 {
        self.epsilon / self.sound_speed_sqr().sqrt()
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            gamma: 2.0,
            rho_bar: 1.0,
            epsilon: 0.1,
        }
    }
}
