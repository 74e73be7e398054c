//! Parabolic–elliptic Keller–Segel system
//!
//! ```text
//! ∂ₜN = ΔP(N) + div(N∇V),   −ΔV = N − ϱ̄,
//! ```
//!
//! written for `Ñ = N − ϱ̄`. With `P(N) − P(ϱ̄) = P′(ϱ̄)Ñ + g(Ñ)` the linear
//! part is `−(P′(ϱ̄)|ξ|² + ϱ̄)Ñ̂` on nonzero modes and the remainder
//! `Δg(Ñ) + div(Ñ∇V)` is advanced explicitly by ETD2RK.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::euler_poisson::VACUUM_FRACTION;
use crate::littlewood_paley::{besov_norm, DyadicPartition, Regime};
use crate::model::ModelParams;
use crate::series::TimeSeries;
use crate::spectral::{
    divergence, laplacian, poisson_inverse_gradient_mean_free, Grid, SpectralField, VectorField,
};

/// Density perturbation `Ñ = N − ϱ̄` at a time stamp.
#[derive(Clone, Debug)]
pub struct KSState {
    pub time: f64,
    pub n: SpectralField,
}

impl KSState {
    pub fn new(time: f64, n: SpectralField) -> Self {
        Self { time, n }
    }

    pub fn equilibrium(grid: &Grid) -> Self {
        Self {
            time: 0.0,
            n: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.n.grid()
    }

    /// `∫Ñ dx`.
    pub fn mass(&self) -> f64 {
        self.n.mean() * self.grid().volume()
    }

    pub fn min_density(&self, params: &ModelParams) -> f64 {
        params.rho_bar
            + self
                .n
                .to_physical()
                .into_iter()
                .fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.n.is_finite()
    }
}

/// Decay rate `P′(ϱ̄)|ξ|² + ϱ̄` of a nonzero mode; 0 at `ξ = 0`.
pub fn linear_rate(params: &ModelParams, k2: f64) -> f64 {
    if k2 > 0.0 {
        params.sound_speed_sqr() * k2 + params.rho_bar
    } else {
        0.0
    }
}

fn physical_density(n: &SpectralField, time: f64, params: &ModelParams) -> Result<Vec<f64>> {
    let rho: Vec<f64> = n
        .to_physical()
        .into_iter()
        .map(|x| params.rho_bar + x)
        .collect();
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::BlowUp {
            time,
            detail: "density is not finite".into(),
        });
    }
    let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = VACUUM_FRACTION * params.rho_bar;
    if min < threshold {
        return Err(Error::Vacuum {
            time,
            min_density: min,
            threshold,
        });
    }
    Ok(rho)
}

fn to_spectral(grid: &Grid, values: &[f64]) -> SpectralField {
    SpectralField::from_physical(grid, values)
        .expect("sample count matches grid")
        .dealiased()
}

/// `ΔP(ϱ̄ + Ñ) + div((ϱ̄ + Ñ)∇(−Δ)⁻¹Ñ)`.
pub fn ks_rhs(n: &SpectralField, params: &ModelParams) -> Result<SpectralField> {
    ks_rhs_at(n, 0.0, params)
}

fn ks_rhs_at(n: &SpectralField, time: f64, params: &ModelParams) -> Result<SpectralField> {
    let grid = n.grid();
    let rho = physical_density(n, time, params)?;
    let p: Vec<f64> = rho.iter().map(|&r| params.pressure(r)).collect();
    let grad_v = poisson_inverse_gradient_mean_free(n);
    let flux = VectorField {
        components: grad_v
            .components
            .iter()
            .map(|g| {
                let f: Vec<f64> = g
                    .to_physical()
                    .iter()
                    .zip(&rho)
                    .map(|(a, r)| a * r)
                    .collect();
                to_spectral(grid, &f)
            })
            .collect(),
    };
    Ok(laplacian(&to_spectral(grid, &p)).add(&divergence(&flux)))
}

/// `(e^z, φ₁(z), φ₂(z))` for real `z ≤ 0`.
fn scalar_phi(z: f64) -> [f64; 3] {
    if z.abs() < 0.1 {
        // Σ z^k/(k+1)! and Σ z^k/(k+2)!
        let (mut p1, mut p2) = (0.0, 0.0);
        let mut term1 = 1.0;
        let mut term2 = 0.5;
        for k in 0..20 {
            p1 += term1;
            p2 += term2;
            term1 *= z / (k as f64 + 2.0);
            term2 *= z / (k as f64 + 3.0);
        }
        [z.exp(), p1, p2]
    } else {
        let em1 = z.exp_m1();
        [z.exp(), em1 / z, (em1 - z) / (z * z)]
    }
}

const CACHE_CAPACITY: usize = 64;

/// ETD2RK integrator for the Keller–Segel system on one grid.
pub struct KellerSegelSolver {
    grid: Grid,
    params: ModelParams,
    /// Linear decay rate of every mode.
    rates: Vec<f64>,
    cache: HashMap<u64, Arc<Vec<[f64; 3]>>>,
}

impl KellerSegelSolver {
    pub fn new(grid: &Grid, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let rates = grid
            .table()
            .deriv_norm2
            .iter()
            .map(|&k2| linear_rate(params, k2))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            params: *params,
            rates,
            cache: HashMap::new(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn propagators(&mut self, dt: f64) -> Arc<Vec<[f64; 3]>> {
        if let Some(p) = self.cache.get(&dt.to_bits()) {
            return p.clone();
        }
        if self.cache.len() >= CACHE_CAPACITY {
            self.cache.clear();
        }
        let p: Arc<Vec<[f64; 3]>> =
            Arc::new(self.rates.iter().map(|&k| scalar_phi(-k * dt)).collect());
        self.cache.insert(dt.to_bits(), p.clone());
        p
    }

    fn remainder(&self, state: &KSState) -> Result<SpectralField> {
        let mut full = ks_rhs_at(&state.n, state.time, &self.params)?;
        for ((f, u), k) in full
            .coeffs_mut()
            .iter_mut()
            .zip(state.n.coeffs())
            .zip(&self.rates)
        {
            *f += u * k;
        }
        Ok(full)
    }

    pub fn step(&mut self, state: &KSState, dt: f64) -> Result<KSState> {
        if state.grid() != &self.grid {
            return Err(Error::Structure(
                "state does not match the solver's grid".into(),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Precondition(format!(
                "time step must be positive (got {dt})"
            )));
        }
        let props = self.propagators(dt);
        let n0 = self.remainder(state)?;
        let mid_coeffs: Vec<Complex64> = props
            .iter()
            .zip(state.n.coeffs().iter().zip(n0.coeffs()))
            .map(|(p, (u, n))| u * p[0] + n * (dt * p[1]))
            .collect();
        let mid = KSState {
            time: state.time + dt,
            n: SpectralField::from_coeffs(&self.grid, mid_coeffs)?,
        };
        let n1 = self.remainder(&mid)?;
        let out_coeffs: Vec<Complex64> = props
            .iter()
            .zip(mid.n.coeffs())
            .zip(n1.coeffs().iter().zip(n0.coeffs()))
            .map(|((p, a), (n1, n0))| a + (n1 - n0) * (dt * p[2]))
            .collect();
        let out = KSState {
            time: mid.time,
            n: SpectralField::from_coeffs(&self.grid, out_coeffs)?,
        };
        if !out.is_finite() {
            return Err(Error::BlowUp {
                time: out.time,
                detail: "non-finite coefficients after step".into(),
            });
        }
        Ok(out)
    }

    /// Advances `state` to `t_end` with steps of at most `dt`.
    pub fn advance_to(&mut self, state: &KSState, t_end: f64, dt: f64) -> Result<KSState> {
        let mut s = state.clone();
        let tol = 1e-12 * t_end.abs().max(1.0);
        while s.time < t_end - tol {
            let h = dt.min(t_end - s.time);
            s = self.step(&s, h)?;
        }
        s.time = t_end;
        Ok(s)
    }
}

/// One ETD2RK step of the Keller–Segel system.
pub fn ks_step(state: &KSState, dt: f64, params: &ModelParams) -> Result<KSState> {
    KellerSegelSolver::new(state.grid(), params)?.step(state, dt)
}

/// Left-hand side of the Keller–Segel a-priori estimate along a trajectory.
/// Both solution-space conventions are reported: indices `(d/2 − 1, d/2)` and
/// `(d/2 − 2, d/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KsApriori {
    /// `sup_t ‖Ñ‖_{Ḃ^{d/2−1} ∩ Ḃ^{d/2}}`.
    pub sup_norm: f64,
    /// `∫ ‖Ñ‖_{Ḃ^{d/2+2} ∩ Ḃ^{d/2+1}} dt`.
    pub integral_norm: f64,
    /// `‖Ñ₀‖_{Ḃ^{d/2−1} ∩ Ḃ^{d/2}}`.
    pub initial_norm: f64,
    /// `(sup_norm + integral_norm)/initial_norm`; `None` for zero data.
    pub ratio: Option<f64>,
    /// `sup_t ‖Ñ‖_{Ḃ^{d/2−2} ∩ Ḃ^{d/2}}`.
    pub sup_norm_alt: f64,
    /// `∫ ‖Ñ‖_{Ḃ^{d/2−2} ∩ Ḃ^{d/2}} dt`.
    pub integral_norm_alt: f64,
}

pub fn ks_apriori_functional(trajectory: &[KSState], partition: &DyadicPartition) -> KsApriori {
    let d = trajectory
        .first()
        .map(|s| s.grid().dim() as f64)
        .unwrap_or(1.0);
    let h = d / 2.0;
    let both = |n: &SpectralField, s1: f64, s2: f64| {
        besov_norm(n, s1, Regime::Full, partition) + besov_norm(n, s2, Regime::Full, partition)
    };
    let times: Vec<f64> = trajectory.iter().map(|s| s.time).collect();
    let series = |f: &dyn Fn(&SpectralField) -> f64| {
        TimeSeries::from_parts(times.clone(), trajectory.iter().map(|s| f(&s.n)).collect())
    };
    let low = series(&|n| both(n, h - 1.0, h));
    let high = series(&|n| both(n, h + 2.0, h + 1.0));
    let alt = series(&|n| both(n, h - 2.0, h));
    let initial_norm = low.values.first().copied().unwrap_or(0.0);
    let sup_norm = low.sup();
    let integral_norm = high.integral();
    let ratio = (initial_norm > 0.0).then(|| (sup_norm + integral_norm) / initial_norm);
    KsApriori {
        sup_norm,
        integral_norm,
        initial_norm,
        ratio,
        sup_norm_alt: alt.sup(),
        integral_norm_alt: alt.integral(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_branches_agree_at_switch() {
        for z in [-0.0999999, -0.1000001] {
            let [e, p1, p2] = scalar_phi(z);
            assert!((e - z.exp()).abs() < 1e-15);
            assert!((p1 - z.exp_m1() / z).abs() < 1e-14);
            assert!((p2 - (z.exp_m1() - z) / (z * z)).abs() < 1e-12);
        }
        assert_eq!(scalar_phi(0.0), [1.0, 1.0, 0.5]);
    }

    #[test]
    fn rate_vanishes_on_mean() {
        let p = ModelParams::new(1.0, 2.0, 1.0, 0.1).unwrap();
        assert_eq!(linear_rate(&p, 0.0), 0.0);
        assert_eq!(linear_rate(&p, 2.0), 2.0 * p.sound_speed_sqr() + p.rho_bar);
    }
}
