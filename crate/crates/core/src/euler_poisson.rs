//! Pseudo-spectral solver for the damped Euler–Poisson system
//!
//! ```text
//! ∂ₜϱ + div(ϱv) = 0,
//! ∂ₜv + v·∇v + w(∇P(ϱ)/ϱ + ∇(−Δ)⁻¹(ϱ − ϱ̄)) + c v = 0,
//! ```
//!
//! in the original frame (`w = 1`, `c = ε⁻¹`) or the diffusively rescaled
//! frame (`w = c = ε⁻²`). The two are related by `τ = εt`, `ṽ = v/ε`.
//!
//! Time stepping is second-order exponential Runge–Kutta (ETD2RK): the
//! linearisation about `(ϱ̄, 0)` is propagated exactly per Fourier shell and
//! the remainder is explicit. Products are formed in physical space and
//! truncated by the 2/3 rule.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linear_analysis::{LinearCoefficients, ShellIndex, ShellOperator, ShellPropagator};
use crate::littlewood_paley::{
    block_norms, block_norms_vector, BlockNorms, DyadicPartition, Regime,
};
use crate::model::ModelParams;
use crate::series::TimeSeries;
use crate::spectral::{
    divergence, gradient, poisson_inverse_gradient_mean_free, Grid, SpectralField, VectorField,
};

/// Minimum admissible density as a fraction of ϱ̄.
pub const VACUUM_FRACTION: f64 = 0.1;
/// Largest admissible `dt‖v‖_∞/Δx`.
pub const CFL_LIMIT: f64 = 0.5;
/// Largest admissible step.
pub const DT_MAX: f64 = 0.5;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn pressure(rho: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_positive(rho)?;
    Ok(rho.iter().map(|&r| params.pressure(r)).collect())
}

/// `c = ((γA)^{1/2}/γ̃) ϱ^{γ̃}`.
pub fn makino_transform(rho: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_positive(rho)?;
    let k = params.makino_constant();
    let g = params.gamma_tilde();
    Ok(rho.iter().map(|&r| k * r.powf(g)).collect())
}

pub fn makino_inverse(c: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_positive(c)?;
    Ok(c.iter().map(|&x| params.density_of_makino(x)).collect())
}

fn check_positive(values: &[f64]) -> Result<()> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        Ok(())
    } else {
        Err(Error::Vacuum {
            time: f64::NAN,
            min_density: min,
            threshold: 0.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    /// `(ϱ, v)(t, x)`, damping `ε⁻¹v`.
    Original,
    /// `(ϱ̃, ṽ)(τ, x) = (ϱ, v/ε)(τ/ε, x)`.
    Rescaled,
}

impl Frame {
    pub fn label(self) -> &'static str {
        match self {
            Frame::Original => "original",
            Frame::Rescaled => "rescaled",
        }
    }
}

/// Weights `(w, c)` of the pressure/Poisson and damping terms.
fn frame_weights(params: &ModelParams, frame: Frame) -> (f64, f64) {
    let e = params.epsilon;
    match frame {
        Frame::Original => (1.0, 1.0 / e),
        Frame::Rescaled => (1.0 / (e * e), 1.0 / (e * e)),
    }
}

/// Coefficients of the linearisation about `(ϱ̄, 0)`.
pub fn linear_coefficients(params: &ModelParams, frame: Frame) -> LinearCoefficients {
    let (w, c) = frame_weights(params, frame);
    LinearCoefficients {
        mass: params.rho_bar,
        pressure: w * params.enthalpy_slope(),
        poisson: w,
        damping: c,
    }
}

/// Density perturbation `ϱ − ϱ̄` and velocity at a time stamp.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub time: f64,
    pub frame: Frame,
    pub rho: SpectralField,
    pub v: VectorField,
}

impl FlowState {
    pub fn new(time: f64, frame: Frame, rho: SpectralField, v: VectorField) -> Result<Self> {
        if v.grid() != rho.grid() || v.dim() != rho.grid().dim() {
            return Err(Error::Structure(
                "velocity must have one component per axis on the density grid".into(),
            ));
        }
        Ok(Self {
            time,
            frame,
            rho,
            v,
        })
    }

    pub fn equilibrium(grid: &Grid, frame: Frame) -> Self {
        Self {
            time: 0.0,
            frame,
            rho: SpectralField::zeros(grid),
            v: VectorField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// `∫(ϱ − ϱ̄) dx`.
    pub fn mass(&self) -> f64 {
        self.rho.mean() * self.grid().volume()
    }

    pub fn min_density(&self, params: &ModelParams) -> f64 {
        params.rho_bar
            + self
                .rho
                .to_physical()
                .into_iter()
                .fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.v.is_finite()
    }

    /// The same state expressed in `frame`.
    pub fn to_frame(&self, frame: Frame, eps: f64) -> Self {
        let (time, v) = match (self.frame, frame) {
            (a, b) if a == b => (self.time, self.v.clone()),
            (Frame::Original, Frame::Rescaled) => (eps * self.time, self.v.scaled(1.0 / eps)),
            _ => (self.time / eps, self.v.scaled(eps)),
        };
        Self {
            time,
            frame,
            rho: self.rho.clone(),
            v,
        }
    }
}

/// Time derivative of a [`FlowState`].
#[derive(Clone, Debug)]
pub struct Tendency {
    pub rho: SpectralField,
    pub v: VectorField,
}

impl Tendency {
    fn sub(&self, other: &Self) -> Self {
        Self {
            rho: self.rho.sub(&other.rho),
            v: self.v.sub(&other.v),
        }
    }
}

fn physical_density(state: &FlowState, params: &ModelParams) -> Result<Vec<f64>> {
    let rho: Vec<f64> = state
        .rho
        .to_physical()
        .into_iter()
        .map(|r| params.rho_bar + r)
        .collect();
    let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = VACUUM_FRACTION * params.rho_bar;
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::BlowUp {
            time: state.time,
            detail: "density is not finite".into(),
        });
    }
    if min < threshold {
        return Err(Error::Vacuum {
            time: state.time,
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

/// `∇P(ϱ)/ϱ` with every product dealiased.
fn pressure_force(rho: &[f64], grid: &Grid, params: &ModelParams) -> VectorField {
    let p: Vec<f64> = rho.iter().map(|&r| params.pressure(r)).collect();
    let grad = gradient(&to_spectral(grid, &p));
    VectorField {
        components: grad
            .components
            .iter()
            .map(|g| {
                let q: Vec<f64> = g
                    .to_physical()
                    .iter()
                    .zip(rho)
                    .map(|(a, r)| a / r)
                    .collect();
                to_spectral(grid, &q)
            })
            .collect(),
    }
}

/// Right-hand side in the state's own frame.
pub fn rhs(state: &FlowState, params: &ModelParams) -> Result<Tendency> {
    let grid = state.grid();
    let rho = physical_density(state, params)?;
    let v_phys: Vec<Vec<f64>> = state.v.components.iter().map(|c| c.to_physical()).collect();

    let flux = VectorField {
        components: v_phys
            .iter()
            .map(|vc| {
                let f: Vec<f64> = vc.iter().zip(&rho).map(|(a, r)| a * r).collect();
                to_spectral(grid, &f)
            })
            .collect(),
    };
    let d_rho = divergence(&flux).scaled(-1.0);

    let (w, c) = frame_weights(params, state.frame);
    let force = pressure_force(&rho, grid, params);
    let poisson = poisson_inverse_gradient_mean_free(&state.rho);
    let mut d_v = Vec::with_capacity(grid.dim());
    for (i, vi) in state.v.components.iter().enumerate() {
        let mut adv = vec![0.0; grid.len()];
        for (vj, g) in v_phys.iter().zip(&gradient(vi).components) {
            for ((a, x), y) in adv.iter_mut().zip(vj).zip(g.to_physical()) {
                *a -= x * y;
            }
        }
        let mut comp = to_spectral(grid, &adv);
        comp.axpy(-w, &force.components[i]);
        comp.axpy(-w, &poisson.components[i]);
        comp.axpy(-c, vi);
        d_v.push(comp);
    }
    Ok(Tendency {
        rho: d_rho,
        v: VectorField { components: d_v },
    })
}

/// Right-hand side of the rescaled system.
pub fn rhs_rescaled(state: &FlowState, params: &ModelParams) -> Result<Tendency> {
    if state.frame != Frame::Rescaled {
        return Err(Error::Precondition(
            "rhs_rescaled needs a rescaled-frame state".into(),
        ));
    }
    rhs(state, params)
}

/// `W̃ = ∇P(ϱ̃)/ϱ̃ + ṽ + ∇(−Δ)⁻¹(ϱ̃ − ϱ̄)`, with the velocity taken in the
/// rescaled frame.
pub fn damped_mode(state: &FlowState, params: &ModelParams) -> Result<VectorField> {
    let rho = physical_density(state, params)?;
    let v = match state.frame {
        Frame::Rescaled => state.v.clone(),
        Frame::Original => state.v.scaled(1.0 / params.epsilon),
    };
    let mut w = pressure_force(&rho, state.grid(), params).add(&v);
    w.axpy(1.0, &poisson_inverse_gradient_mean_free(&state.rho));
    Ok(w)
}

/// Symmetrised view `(c − c̄, v)` in the state's frame.
pub fn symmetrized_view(
    state: &FlowState,
    params: &ModelParams,
) -> Result<(SpectralField, VectorField)> {
    let rho = physical_density(state, params)?;
    let c_bar = params.c_bar();
    let c: Vec<f64> = makino_transform(&rho, params)?
        .into_iter()
        .map(|x| x - c_bar)
        .collect();
    Ok((
        SpectralField::from_physical(state.grid(), &c)?,
        state.v.clone(),
    ))
}

const CACHE_CAPACITY: usize = 64;

/// ETD2RK integrator bound to one grid, parameter set and frame.
pub struct EulerPoissonSolver {
    grid: Grid,
    params: ModelParams,
    frame: Frame,
    coeffs: LinearCoefficients,
    shells: ShellIndex,
    cache: HashMap<u64, Arc<Vec<ShellPropagator>>>,
}

impl EulerPoissonSolver {
    pub fn new(grid: &Grid, params: &ModelParams, frame: Frame) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid: grid.clone(),
            params: *params,
            frame,
            coeffs: linear_coefficients(params, frame),
            shells: ShellIndex::new(grid),
            cache: HashMap::new(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn propagators(&mut self, dt: f64) -> Arc<Vec<ShellPropagator>> {
        if let Some(p) = self.cache.get(&dt.to_bits()) {
            return p.clone();
        }
        if self.cache.len() >= CACHE_CAPACITY {
            self.cache.clear();
        }
        let p = Arc::new(self.shells.propagators(&self.coeffs, dt));
        self.cache.insert(dt.to_bits(), p.clone());
        p
    }

    /// The linear part `Lz`, mode by mode.
    fn apply_linear(&self, state: &FlowState) -> Tendency {
        let c = &self.coeffs;
        let d = self.grid.dim();
        let mut out_rho = SpectralField::zeros(&self.grid);
        let mut out_v = VectorField::zeros(&self.grid);
        for idx in 0..self.grid.len() {
            let r = state.rho.coeffs()[idx];
            match self.shells.direction(idx, d) {
                Some(khat) => {
                    let k = self.shells.k2[self.shells.shell_of[idx] as usize].sqrt();
                    let q: Complex64 = khat
                        .iter()
                        .zip(&state.v.components)
                        .map(|(a, f)| f.coeffs()[idx] * a)
                        .sum();
                    out_rho.coeffs_mut()[idx] = -I * (c.mass * k) * q;
                    let lower = -I * (c.pressure * k + c.poisson / k) * r;
                    for a in 0..d {
                        out_v.components[a].coeffs_mut()[idx] =
                            lower * khat[a] - state.v.components[a].coeffs()[idx] * c.damping;
                    }
                }
                None => {
                    for a in 0..d {
                        out_v.components[a].coeffs_mut()[idx] =
                            -state.v.components[a].coeffs()[idx] * c.damping;
                    }
                }
            }
        }
        Tendency {
            rho: out_rho,
            v: out_v,
        }
    }

    /// Nonlinear remainder `N(z) = F(z) − Lz`.
    fn remainder(&self, state: &FlowState) -> Result<Tendency> {
        Ok(rhs(state, &self.params)?.sub(&self.apply_linear(state)))
    }

    pub fn check_step(&self, state: &FlowState, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Precondition(format!(
                "time step must be positive (got {dt})"
            )));
        }
        let cfl = dt * state.v.max_speed() / self.grid.spacing();
        if cfl > CFL_LIMIT || dt > DT_MAX {
            return Err(Error::StepSize {
                dt,
                cfl,
                limit: CFL_LIMIT,
            });
        }
        Ok(())
    }

    /// Largest admissible step for `state`.
    pub fn max_step(&self, state: &FlowState) -> f64 {
        let speed = state.v.max_speed();
        if speed > 0.0 {
            (CFL_LIMIT * self.grid.spacing() / speed).min(DT_MAX)
        } else {
            DT_MAX
        }
    }

    pub fn step(&mut self, state: &FlowState, dt: f64) -> Result<FlowState> {
        if state.frame != self.frame || state.grid() != &self.grid {
            return Err(Error::Structure(
                "state does not match the solver's grid and frame".into(),
            ));
        }
        self.check_step(state, dt)?;
        let props = self.propagators(dt);
        let n0 = self.remainder(state)?;
        let mut mid = state.clone();
        mid.time = state.time + dt;
        self.apply_pair(&props, &mut mid, &n0, dt, |p| (&p.exp, &p.phi1));
        let n1 = self.remainder(&mid)?;
        let mut out = mid;
        self.apply_pair(&props, &mut out, &n1.sub(&n0), dt, |p| (&IDENTITY, &p.phi2));
        if !out.is_finite() {
            return Err(Error::BlowUp {
                time: out.time,
                detail: "non-finite coefficients after step".into(),
            });
        }
        Ok(out)
    }

    /// `z ← A z + h B n` with `(A, B)` chosen per shell.
    fn apply_pair(
        &self,
        props: &[ShellPropagator],
        z: &mut FlowState,
        n: &Tendency,
        h: f64,
        pick: impl Fn(&ShellPropagator) -> (&ShellOperator, &ShellOperator),
    ) {
        let d = self.grid.dim();
        let mut vz = [Complex64::new(0.0, 0.0); 3];
        let mut vn = [Complex64::new(0.0, 0.0); 3];
        for idx in 0..self.grid.len() {
            let (a_op, b_op) = pick(&props[self.shells.shell_of[idx] as usize]);
            let dir = self.shells.direction(idx, d);
            let mut rz = z.rho.coeffs()[idx];
            let mut rn = n.rho.coeffs()[idx] * h;
            for a in 0..d {
                vz[a] = z.v.components[a].coeffs()[idx];
                vn[a] = n.v.components[a].coeffs()[idx] * h;
            }
            a_op.apply(dir, &mut rz, &mut vz[..d]);
            b_op.apply(dir, &mut rn, &mut vn[..d]);
            z.rho.coeffs_mut()[idx] = rz + rn;
            for a in 0..d {
                z.v.components[a].coeffs_mut()[idx] = vz[a] + vn[a];
            }
        }
    }

    /// Advances `state` to `t_end` with steps of at most `dt`.
    pub fn advance_to(&mut self, state: &FlowState, t_end: f64, dt: f64) -> Result<FlowState> {
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

const IDENTITY: ShellOperator = ShellOperator {
    longitudinal: [
        [
            Complex64 { re: 1.0, im: 0.0 },
            Complex64 { re: 0.0, im: 0.0 },
        ],
        [
            Complex64 { re: 0.0, im: 0.0 },
            Complex64 { re: 1.0, im: 0.0 },
        ],
    ],
    transverse: 1.0,
};

/// One summand of the global-existence functional, as a running value in time.
#[derive(Clone, Debug)]
pub struct FunctionalComponent {
    pub label: &'static str,
    pub values: Vec<f64>,
}

/// Summands of `𝒵ε(t)` in the original frame: running sups (`L∞`) and running
/// trapezoid integrals (`L¹`) of regime-restricted Besov norms.
#[derive(Clone, Debug)]
pub struct EpApriori {
    /// Original-frame times.
    pub times: Vec<f64>,
    pub components: Vec<FunctionalComponent>,
    pub j_min: i32,
    pub j_max: i32,
    /// Regimes with no resolved block on this grid.
    pub empty_regimes: Vec<Regime>,
}

impl EpApriori {
    pub fn truncated(&self) -> bool {
        !self.empty_regimes.is_empty()
    }

    /// `𝒵ε(t_k)` for every sample.
    pub fn total(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| self.components.iter().map(|c| c.values[k]).sum())
            .collect()
    }

    pub fn component(&self, label: &str) -> Option<&FunctionalComponent> {
        self.components.iter().find(|c| c.label == label)
    }
}

/// `(label, integrated in time, power of ε in front)` for each summand.
const TERMS: [(&str, bool, i32); 11] = [
    ("sup_rho_l", false, 0),
    ("sup_rho_lplus", false, 0),
    ("sup_v_lminus", false, 0),
    ("sup_pair_h", false, 1),
    ("int_rho_l", true, 1),
    ("int_v_l", true, 0),
    ("int_rho_lplus", true, 1),
    ("int_v_lplus", true, 0),
    ("int_pair_h", true, 0),
    ("sup_w", false, 0),
    ("int_w", true, -1),
];

fn instantaneous_terms(x: &Sample, p: &DyadicPartition, h: f64) -> [f64; 11] {
    let b = |n: &BlockNorms, s: f64, r: Regime| p.besov_from_blocks(n, s, r);
    let pair_high = b(&x.rho, h + 1.0, Regime::High) + b(&x.v, h + 1.0, Regime::High);
    let w = b(&x.w, h, Regime::Full);
    [
        b(&x.rho, h - 1.0, Regime::Low),
        b(&x.rho, h, Regime::Medium),
        b(&x.v, h, Regime::VeryLow),
        pair_high,
        b(&x.rho, h - 1.0, Regime::Low),
        b(&x.v, h, Regime::Low),
        b(&x.rho, h + 2.0, Regime::Medium),
        b(&x.v, h + 1.0, Regime::Medium),
        pair_high,
        w,
        w,
    ]
}

struct Sample {
    rho: BlockNorms,
    v: BlockNorms,
    w: BlockNorms,
}

/// Evaluates every summand of `𝒵ε` along `trajectory`. States may be in
/// either frame; they are read in the original frame, where
/// `wε = ε∇P(ϱ)/ϱ + v + ε∇(−Δ)⁻¹(ϱ − ϱ̄) = εW̃`. `partition` should carry the
/// original-frame thresholds (very low below 1, high above ε⁻¹/2).
pub fn ep_apriori_functional(
    trajectory: &[FlowState],
    params: &ModelParams,
    partition: &DyadicPartition,
) -> Result<EpApriori> {
    let eps = params.epsilon;
    let d = trajectory
        .first()
        .map(|s| s.grid().dim() as f64)
        .unwrap_or(1.0);
    let mut times = Vec::with_capacity(trajectory.len());
    let mut samples = Vec::with_capacity(trajectory.len());
    for state in trajectory {
        let s = state.to_frame(Frame::Original, eps);
        let w = damped_mode(&s, params)?.scaled(eps);
        times.push(s.time);
        samples.push(Sample {
            rho: block_norms(&s.rho, partition),
            v: block_norms_vector(&s.v, partition),
            w: block_norms_vector(&w, partition),
        });
    }
    let per_sample: Vec<[f64; 11]> = samples
        .iter()
        .map(|x| instantaneous_terms(x, partition, d / 2.0))
        .collect();
    let components = TERMS
        .iter()
        .enumerate()
        .map(|(i, &(label, integrate, eps_power))| {
            let series =
                TimeSeries::from_parts(times.clone(), per_sample.iter().map(|v| v[i]).collect());
            let running = if integrate {
                series.running_integral()
            } else {
                series.running_sup()
            };
            let weight = eps.powi(eps_power);
            FunctionalComponent {
                label,
                values: running.into_iter().map(|v| weight * v).collect(),
            }
        })
        .collect();
    let empty_regimes = [Regime::VeryLow, Regime::Medium, Regime::High]
        .into_iter()
        .filter(|&r| !partition.blocks().any(|j| partition.contains(j, r)))
        .collect();
    Ok(EpApriori {
        times,
        components,
        j_min: partition.j_min,
        j_max: partition.j_max,
        empty_regimes,
    })
}
