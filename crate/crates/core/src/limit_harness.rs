//! ε-ladder experiments for the relaxation limit.
//!
//! All studies integrate the Euler–Poisson system in the diffusive frame
//! `(τ, ṽ) = (εt, v/ε)` and compare against Keller–Segel on the same sampling
//! comb. Time integrals use the trapezoid rule on the sampled norm series.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::euler_poisson::{damped_mode, EulerPoissonSolver, FlowState, Frame};
use crate::keller_segel::{KSState, KellerSegelSolver};
use crate::littlewood_paley::{besov_norm_vector, block_norms, DyadicPartition, Regime};
use crate::model::{ModelParams, EPSILON_MAX};
use crate::series::TimeSeries;
use crate::spectral::{random_real_field, Grid, SpectralField, VectorField};

/// A series whose last value exceeds this fraction of its maximum has not
/// saturated; the horizon is doubled.
pub const TAIL_FRACTION: f64 = 0.01;
/// Horizon doublings allowed before the tail criterion is reported as unmet.
pub const MAX_DOUBLINGS: u32 = 3;

/// Step sequence `h_k = min(h₀ g^k, h_max)`, clipped at the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub dt_min: f64,
    pub growth: f64,
    pub dt_max: f64,
    pub horizon: f64,
}

impl TimeGrid {
    pub fn new(dt_min: f64, growth: f64, dt_max: f64, horizon: f64) -> Result<Self> {
        if !(dt_min > 0.0 && dt_max >= dt_min && growth >= 1.0 && horizon > 0.0) {
            return Err(Error::Precondition(format!(
                "time grid needs 0 < dt_min ≤ dt_max, growth ≥ 1, horizon > 0 \
                 (got {dt_min}, {dt_max}, {growth}, {horizon})"
            )));
        }
        Ok(Self {
            dt_min,
            growth,
            dt_max,
            horizon,
        })
    }

    pub fn uniform(dt: f64, horizon: f64) -> Result<Self> {
        Self::new(dt, 1.0, dt, horizon)
    }

    /// Resolves the `O(ε²)` initial layer of the diffusive frame.
    pub fn graded(eps: f64, horizon: f64) -> Self {
        let dt_max = 0.01;
        Self {
            dt_min: (0.05 * eps * eps).min(dt_max),
            growth: 1.05,
            dt_max,
            horizon,
        }
    }

    /// Sample times `0 = t₀ < t₁ < … = horizon`.
    pub fn times(&self) -> Vec<f64> {
        self.times_from(0.0, 0)
    }

    fn times_from(&self, start: f64, k0: usize) -> Vec<f64> {
        let mut out = vec![start];
        let mut t = start;
        let mut k = k0 as i32;
        let tol = 1e-12 * self.horizon.max(1.0);
        while t < self.horizon - tol {
            let h = (self.dt_min * self.growth.powi(k)).min(self.dt_max);
            t = (t + h).min(self.horizon);
            if self.horizon - t < tol {
                t = self.horizon;
            }
            out.push(t);
            k += 1;
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dt_min: self.dt_min * s,
            growth: self.growth,
            dt_max: self.dt_max * s,
            horizon: self.horizon * s,
        }
    }
}

/// Initial perturbation shape.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// Centred Gaussian of standard deviation `width`; velocity components are
    /// Gaussians with shifted centres.
    Gaussian { width: f64 },
    /// `cos(ξ_k·x)` density with zero velocity.
    SingleMode { k: [i64; 3] },
    /// Uniform random coefficients on integer wavenumbers `[k_min, k_max]`.
    RandomBand { k_min: f64, k_max: f64, seed: u64 },
}

/// Shared initial data: density perturbation `ϱ₀ − ϱ̄` and the original-frame
/// velocity `v₀`. The diffusive-frame velocity is `v₀/ε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialData {
    pub kind: InitKind,
    pub amplitude: f64,
}

impl InitialData {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self {
            kind: InitKind::Gaussian { width },
            amplitude,
        }
    }

    pub fn single_mode(amplitude: f64, k: [i64; 3]) -> Self {
        Self {
            kind: InitKind::SingleMode { k },
            amplitude,
        }
    }

    pub fn random_band(amplitude: f64, k_min: f64, k_max: f64, seed: u64) -> Self {
        Self {
            kind: InitKind::RandomBand { k_min, k_max, seed },
            amplitude,
        }
    }

    /// Mean-free, dealiased `(ϱ₀ − ϱ̄, v₀)`; every field has sup norm `amplitude`
    /// before mean removal.
    pub fn fields(&self, grid: &Grid) -> Result<(SpectralField, VectorField)> {
        let d = grid.dim();
        let finish = |f: SpectralField| -> SpectralField {
            let mut f = f.dealiased();
            f.remove_mean();
            let m = f.to_physical().iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if m > 0.0 {
                f.scaled(self.amplitude / m)
            } else {
                f
            }
        };
        let (rho, v) = match &self.kind {
            InitKind::Gaussian { width } => {
                if !(*width > 0.0) {
                    return Err(Error::Precondition(format!(
                        "gaussian width must be positive (got {width})"
                    )));
                }
                let l = grid.length();
                let bump = |shift: f64| {
                    SpectralField::from_fn(grid, |x| {
                        let r2: f64 = x
                            .iter()
                            .enumerate()
                            .map(|(a, xa)| {
                                let c = 0.5 * l + if a == 0 { shift } else { 0.0 };
                                let dx = xa - c;
                                dx * dx
                            })
                            .sum();
                        (-r2 / (2.0 * width * width)).exp()
                    })
                };
                let rho = finish(bump(0.0));
                let v = (0..d)
                    .map(|a| finish(bump((a as f64 + 1.0) * width)))
                    .collect();
                (rho, v)
            }
            InitKind::SingleMode { k } => {
                let xi: Vec<f64> = (0..d).map(|a| grid.fundamental() * k[a] as f64).collect();
                if xi.iter().all(|x| *x == 0.0) {
                    return Err(Error::SingularMode("single mode needs k ≠ 0".into()));
                }
                let rho = SpectralField::from_fn(grid, |x| {
                    self.amplitude * xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().cos()
                });
                (rho, (0..d).map(|_| SpectralField::zeros(grid)).collect())
            }
            InitKind::RandomBand { k_min, k_max, seed } => {
                let rho = finish(random_real_field(grid, *seed, *k_min, *k_max));
                let v = (0..d)
                    .map(|a| finish(random_real_field(grid, seed + 1 + a as u64, *k_min, *k_max)))
                    .collect();
                (rho, v)
            }
        };
        Ok((rho, VectorField::new(v)?))
    }

    pub fn flow_state(&self, grid: &Grid, frame: Frame, eps: f64) -> Result<FlowState> {
        let (rho, v) = self.fields(grid)?;
        let original = FlowState::new(0.0, Frame::Original, rho, v)?;
        Ok(original.to_frame(frame, eps))
    }

    pub fn ks_state(&self, grid: &Grid) -> Result<KSState> {
        Ok(KSState::new(0.0, self.fields(grid)?.0))
    }
}

/// Decreasing list of relaxation parameters sharing grid, data and horizon.
#[derive(Clone, Debug)]
pub struct EpsilonLadder {
    pub epsilons: Vec<f64>,
    pub base: ModelParams,
    pub grid: Grid,
    pub initial: InitialData,
    pub horizon: f64,
}

impl EpsilonLadder {
    /// Ladders shorter than three points are accepted; studies on them report
    /// no slope.
    pub fn new(
        epsilons: Vec<f64>,
        base: ModelParams,
        grid: Grid,
        initial: InitialData,
        horizon: f64,
    ) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(Error::ConfigKey {
                key: "ladder.epsilons".into(),
                message: "ladder needs at least one epsilon".into(),
            });
        }
        for &e in &epsilons {
            if !(e > 0.0 && e <= EPSILON_MAX) {
                return Err(Error::ConfigKey {
                    key: "ladder.epsilons".into(),
                    message: format!("every epsilon must lie in (0, 0.5] (got {e})"),
                });
            }
        }
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::ConfigKey {
                key: "ladder.epsilons".into(),
                message: "epsilons must be strictly decreasing".into(),
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::ConfigKey {
                key: "ladder.horizon".into(),
                message: format!("horizon must be positive and finite (got {horizon})"),
            });
        }
        Ok(Self {
            epsilons,
            base,
            grid,
            initial,
            horizon,
        })
    }

    /// `{0.2, 0.1, 0.05, 0.025}`.
    pub fn default_epsilons() -> Vec<f64> {
        vec![0.2, 0.1, 0.05, 0.025]
    }

    pub fn supports_fit(&self) -> bool {
        self.epsilons.len() >= 3
    }

    fn params(&self, eps: f64) -> Result<ModelParams> {
        self.base.with_epsilon(eps)
    }
}

/// Least-squares line through `(log ε, log error)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residuals in log coordinates, one per used pair.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub slope_stderr: f64,
    /// 95% Student-t band for the slope.
    pub band: (f64, f64),
    /// Indices of excluded (nonpositive or non-finite) pairs.
    pub excluded: Vec<usize>,
}

pub fn fit_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (i, &(e, err)) in pairs.iter().enumerate() {
        if e > 0.0 && err > 0.0 && e.is_finite() && err.is_finite() {
            pts.push((e.ln(), err.ln()));
        } else {
            warn!("slope fit: excluding pair {i} (eps = {e}, error = {err})");
            excluded.push(i);
        }
    }
    let n = pts.len();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "slope fit needs at least 3 positive pairs (got {n})"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate(
            "slope fit needs distinct ε values".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = pts
        .iter()
        .map(|p| p.1 - (intercept + slope * p.0))
        .collect();
    let max_residual = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let dof = nf - 2.0;
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_stderr = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Degenerate(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        residuals,
        max_residual,
        slope_stderr,
        band: (slope - t * slope_stderr, slope + t * slope_stderr),
        excluded,
    })
}

/// Rewrites an original-frame trajectory in the diffusive frame, sample by
/// sample: `τ = εt`, `ṽ = v/ε`, density unchanged.
pub fn diffusive_rescale(trajectory: &[FlowState], eps: f64) -> Result<Vec<FlowState>> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!(
            "epsilon must be positive (got {eps})"
        )));
    }
    trajectory
        .iter()
        .map(|s| match s.frame {
            Frame::Original => Ok(s.to_frame(Frame::Rescaled, eps)),
            Frame::Rescaled => Err(Error::Structure(
                "diffusive_rescale expects original-frame states".into(),
            )),
        })
        .collect()
}

/// Linear interpolation of a time-ordered trajectory at `times`.
pub fn resample(trajectory: &[FlowState], times: &[f64]) -> Result<Vec<FlowState>> {
    let (first, last) = match (trajectory.first(), trajectory.last()) {
        (Some(a), Some(b)) => (a.time, b.time),
        _ => return Err(Error::Degenerate("empty trajectory".into())),
    };
    let tol = 1e-12 * last.abs().max(1.0);
    times
        .iter()
        .map(|&t| {
            if t < first - tol || t > last + tol {
                return Err(Error::Range(format!(
                    "time {t} outside trajectory span [{first}, {last}]"
                )));
            }
            let hi = trajectory
                .partition_point(|s| s.time < t)
                .min(trajectory.len() - 1);
            let lo = hi.saturating_sub(1);
            let (a, b) = (&trajectory[lo], &trajectory[hi]);
            let w = if b.time > a.time {
                ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let mut rho = a.rho.scaled(1.0 - w);
            rho.axpy(w, &b.rho);
            let mut v = a.v.scaled(1.0 - w);
            v.axpy(w, &b.v);
            FlowState::new(t, a.frame, rho, v)
        })
        .collect()
}

fn record<T>(result: &Result<T>) -> Option<String> {
    result.as_ref().err().map(|e| e.to_string())
}

/// Steps a Euler–Poisson and a Keller–Segel state through `grid`, handing each
/// sample (including `t = 0`) to `observe`. The horizon doubles while
/// `saturated` reports a tail above [`TAIL_FRACTION`].
struct Stepper {
    ep: Option<(EulerPoissonSolver, FlowState)>,
    ks: Option<(KellerSegelSolver, KSState)>,
    grid: TimeGrid,
}

impl Stepper {
    fn run(
        &mut self,
        mut observe: impl FnMut(Option<&FlowState>, Option<&KSState>) -> Result<()>,
        saturated: impl Fn() -> Option<f64>,
    ) -> Result<(f64, Option<f64>, u32)> {
        observe(
            self.ep.as_ref().map(|p| &p.1),
            self.ks.as_ref().map(|p| &p.1),
        )?;
        let mut grid = self.grid;
        let mut start = 0usize;
        let mut doublings = 0;
        loop {
            let times = grid.times_from(self.current_time(), start);
            for w in times.windows(2) {
                let h = w[1] - w[0];
                if let Some((solver, s)) = self.ep.as_mut() {
                    let mut next = solver.step(s, h)?;
                    next.time = w[1];
                    *s = next;
                }
                if let Some((solver, s)) = self.ks.as_mut() {
                    let mut next = solver.step(s, h)?;
                    next.time = w[1];
                    *s = next;
                }
                observe(
                    self.ep.as_ref().map(|p| &p.1),
                    self.ks.as_ref().map(|p| &p.1),
                )?;
            }
            start += times.len() - 1;
            let tail = saturated();
            match tail {
                Some(r) if r > TAIL_FRACTION && doublings < MAX_DOUBLINGS => {
                    doublings += 1;
                    grid.horizon *= 2.0;
                }
                _ => return Ok((grid.horizon, tail, doublings)),
            }
        }
    }

    fn current_time(&self) -> f64 {
        match (&self.ep, &self.ks) {
            (Some((_, s)), _) => s.time,
            (_, Some((_, s))) => s.time,
            _ => 0.0,
        }
    }
}

/// One ladder member of [`damped_mode_decay_study`].
#[derive(Clone, Debug, Serialize)]
pub struct DampedModeRow {
    pub epsilon: f64,
    /// `∫₀ᵀ ‖W̃‖_{Ḃ^{d/2}} dτ`.
    pub integral: f64,
    /// Same integral on every second sample (quadrature check).
    pub integral_half_stride: f64,
    pub horizon: f64,
    pub tail_ratio: Option<f64>,
    pub samples: usize,
    pub error: Option<String>,
}

/// Per-ε table plus fitted slope for a ladder study.
#[derive(Clone, Debug, Serialize)]
pub struct StudyReport<R> {
    pub rows: Vec<R>,
    pub fit: Option<SlopeFit>,
    /// Reasons the study is incomplete or the slope is missing.
    pub flags: Vec<String>,
    /// Adjacent ladder pairs `(ε_big, ε_small)` whose errors increase as ε
    /// decreases.
    pub monotonicity_violations: Vec<(f64, f64)>,
}

impl<R> StudyReport<R> {
    pub fn complete(&self) -> bool {
        self.flags.is_empty()
    }

    /// `"slope=<x> residual=<y> pass=<bool>"` with the pass range `[lo, hi]`.
    pub fn summary_line(&self, lo: f64, hi: f64) -> String {
        match &self.fit {
            Some(f) => format!(
                "slope={:.6} residual={:.6} pass={}",
                f.slope,
                f.max_residual,
                self.passes(lo, hi)
            ),
            None => "slope=NaN residual=NaN pass=false".to_string(),
        }
    }

    pub fn passes(&self, lo: f64, hi: f64) -> bool {
        self.fit
            .as_ref()
            .is_some_and(|f| f.slope >= lo && f.slope <= hi)
    }
}

fn finish_report<R>(
    rows: Vec<R>,
    key: impl Fn(&R) -> (f64, f64, Option<&String>),
) -> StudyReport<R> {
    let flags = rows
        .iter()
        .filter_map(|r| key(r).2.map(|e| format!("run aborted: {e}")))
        .collect();
    let mut report = StudyReport {
        rows,
        fit: None,
        flags,
        monotonicity_violations: Vec::new(),
    };
    let ok: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| key(r).2.is_none())
        .map(|r| (key(r).0, key(r).1))
        .collect();
    for w in ok.windows(2) {
        if w[1].1 > w[0].1 {
            report.monotonicity_violations.push((w[0].0, w[1].0));
        }
    }
    if ok.iter().all(|p| p.1 == 0.0) && !ok.is_empty() {
        report
            .flags
            .push("all values are zero: slope undefined".into());
    }
    match fit_slope(&ok) {
        Ok(f) => {
            if !f.excluded.is_empty() {
                report.flags.push(format!(
                    "{} nonpositive values excluded from the fit",
                    f.excluded.len()
                ));
            }
            report.fit = Some(f);
        }
        Err(e) => report.flags.push(format!("no slope: {e}")),
    }
    report
}

/// `∫₀ᵀ ‖W̃^ε‖_{Ḃ^{d/2}} dτ` across the ladder, with a log-log slope.
pub fn damped_mode_decay_study(ladder: &EpsilonLadder) -> StudyReport<DampedModeRow> {
    let rows: Vec<DampedModeRow> = ladder
        .epsilons
        .par_iter()
        .map(|&eps| damped_mode_row(ladder, eps))
        .collect();
    let mut report = finish_report(rows, |r| (r.epsilon, r.integral, r.error.as_ref()));
    for r in &report.rows {
        if r.error.is_none() && r.tail_ratio.is_some_and(|t| t >= 1.0) {
            report
                .flags
                .push(format!("no decay observed at eps = {}", r.epsilon));
        }
    }
    report
}

fn damped_mode_row(ladder: &EpsilonLadder, eps: f64) -> DampedModeRow {
    let mut series = TimeSeries::new();
    let result = (|| {
        let params = ladder.params(eps)?;
        let part = DyadicPartition::for_physical_frame(&ladder.grid, eps)?;
        let s_half = ladder.grid.dim() as f64 / 2.0;
        let state = ladder
            .initial
            .flow_state(&ladder.grid, Frame::Rescaled, eps)?;
        let solver = EulerPoissonSolver::new(&ladder.grid, &params, Frame::Rescaled)?;
        let mut stepper = Stepper {
            ep: Some((solver, state)),
            ks: None,
            grid: TimeGrid::graded(eps, ladder.horizon),
        };
        let series_ref = std::cell::RefCell::new(&mut series);
        stepper.run(
            |ep, _| {
                let s = ep.expect("damped-mode study steps the flow");
                let w = damped_mode(s, &params)?;
                series_ref
                    .borrow_mut()
                    .push(s.time, besov_norm_vector(&w, s_half, Regime::Full, &part));
                Ok(())
            },
            || series_ref.borrow().tail_ratio(),
        )
    })();
    let (horizon, tail_ratio) = match &result {
        Ok((h, t, _)) => (*h, *t),
        Err(_) => (
            series.times.last().copied().unwrap_or(0.0),
            series.tail_ratio(),
        ),
    };
    DampedModeRow {
        epsilon: eps,
        integral: series.integral(),
        integral_half_stride: half_stride(&series).integral(),
        horizon,
        tail_ratio,
        samples: series.len(),
        error: record(&result),
    }
}

fn half_stride(s: &TimeSeries) -> TimeSeries {
    let mut out = TimeSeries::new();
    let n = s.len();
    for i in (0..n).step_by(2) {
        out.push(s.times[i], s.values[i]);
    }
    if n > 0 && (n - 1) % 2 == 1 {
        out.push(s.times[n - 1], s.values[n - 1]);
    }
    out
}

/// Which solver produces the density compared against Keller–Segel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensitySource {
    EulerPoisson,
    /// Keller–Segel against itself; every error is exactly zero.
    KellerSegel,
}

/// Difference norms of `N − ϱ̃^ε` for one ladder member.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// `sup_τ ‖N − ϱ̃‖_{Ḃ^{d/2−1}}`.
    pub sup_norm: f64,
    /// `∫ ‖N − ϱ̃‖^h_{Ḃ^{d/2+1}} dτ`.
    pub high_integral: f64,
    /// `∫ ‖N − ϱ̃‖^l_{Ḃ^{d/2}} dτ`.
    pub low_integral: f64,
    /// Relative change of the two integrals under stride halving.
    pub quadrature_check: f64,
    /// Regimes with no resolved block (their norms are reported as 0).
    pub empty_regimes: Vec<&'static str>,
    pub horizon: f64,
    pub tail_ratio: Option<f64>,
    pub samples: usize,
    pub error: Option<String>,
}

/// Report of [`ep_ks_convergence_study`]; the slope is fitted to `sup_norm`.
pub type ConvergenceReport = StudyReport<ConvergenceRow>;

pub fn ep_ks_convergence_study(ladder: &EpsilonLadder) -> ConvergenceReport {
    convergence_study_with(ladder, DensitySource::EulerPoisson)
}

pub fn convergence_study_with(ladder: &EpsilonLadder, source: DensitySource) -> ConvergenceReport {
    let rows: Vec<ConvergenceRow> = ladder
        .epsilons
        .par_iter()
        .map(|&eps| convergence_row(ladder, eps, source))
        .collect();
    finish_report(rows, |r| (r.epsilon, r.sup_norm, r.error.as_ref()))
}

/// The three difference norms of `diff` at one instant.
pub fn difference_norms(diff: &SpectralField, part: &DyadicPartition) -> [f64; 3] {
    let h = diff.grid().dim() as f64 / 2.0;
    let blocks = block_norms(diff, part);
    [
        part.besov_from_blocks(&blocks, h - 1.0, Regime::Full),
        part.besov_from_blocks(&blocks, h + 1.0, Regime::High),
        part.besov_from_blocks(&blocks, h, Regime::Low),
    ]
}

fn convergence_row(ladder: &EpsilonLadder, eps: f64, source: DensitySource) -> ConvergenceRow {
    let mut sup = TimeSeries::new();
    let mut high = TimeSeries::new();
    let mut low = TimeSeries::new();
    let mut empty = Vec::new();
    let result = (|| {
        let params = ladder.params(eps)?;
        let part = DyadicPartition::for_physical_frame(&ladder.grid, eps)?;
        for regime in [Regime::Low, Regime::High] {
            if !part.blocks().any(|j| part.contains(j, regime)) {
                empty.push(regime.label());
            }
        }
        let ks = KellerSegelSolver::new(&ladder.grid, &params)?;
        let ks0 = ladder.initial.ks_state(&ladder.grid)?;
        let (ep, twin) = match source {
            DensitySource::EulerPoisson => (
                Some((
                    EulerPoissonSolver::new(&ladder.grid, &params, Frame::Rescaled)?,
                    ladder
                        .initial
                        .flow_state(&ladder.grid, Frame::Rescaled, eps)?,
                )),
                None,
            ),
            DensitySource::KellerSegel => (
                None,
                Some((KellerSegelSolver::new(&ladder.grid, &params)?, ks0.clone())),
            ),
        };
        let series = std::cell::RefCell::new((&mut sup, &mut high, &mut low));
        let twin = std::cell::RefCell::new(twin);
        let mut stepper = Stepper {
            ep,
            ks: Some((ks, ks0)),
            grid: TimeGrid::graded(eps, ladder.horizon),
        };
        let mut first = true;
        stepper.run(
            |ep, ks| {
                let ks = ks.expect("convergence study steps Keller–Segel");
                let diff = match ep {
                    Some(s) => ks.n.sub(&s.rho),
                    None => {
                        let mut t = twin.borrow_mut();
                        let (solver, state) = t.as_mut().expect("twin run");
                        if !first {
                            *state = solver.step(state, ks.time - state.time)?;
                            state.time = ks.time;
                        }
                        ks.n.sub(&state.n)
                    }
                };
                first = false;
                let [a, b, c] = difference_norms(&diff, &part);
                let mut s = series.borrow_mut();
                s.0.push(ks.time, a);
                s.1.push(ks.time, b);
                s.2.push(ks.time, c);
                Ok(())
            },
            || {
                // tail of the combined L¹ integrand
                let s = series.borrow();
                let values =
                    s.1.values
                        .iter()
                        .zip(&s.2.values)
                        .map(|(a, b)| a + b)
                        .collect();
                TimeSeries::from_parts(s.1.times.clone(), values).tail_ratio()
            },
        )
    })();
    let (horizon, tail_ratio) = match &result {
        Ok((h, t, _)) => (*h, *t),
        Err(_) => (sup.times.last().copied().unwrap_or(0.0), None),
    };
    let full = high.integral() + low.integral();
    let halved = half_stride(&high).integral() + half_stride(&low).integral();
    ConvergenceRow {
        epsilon: eps,
        sup_norm: sup.sup(),
        high_integral: high.integral(),
        low_integral: low.integral(),
        quadrature_check: if full > 0.0 {
            (full - halved).abs() / full
        } else {
            0.0
        },
        empty_regimes: empty,
        horizon,
        tail_ratio,
        samples: sup.len(),
        error: record(&result),
    }
}

/// Original-frame run rescaled onto the diffusive comb versus a direct
/// diffusive-frame run.
#[derive(Clone, Debug, Serialize)]
pub struct FrameConsistencyRow {
    pub epsilon: f64,
    /// `max_τ ‖z₁ − z₃‖ / max_τ ‖z₃‖` over the comb, `z = (ϱ − ϱ̄, ṽ)`.
    pub relative_error: f64,
    pub samples: usize,
    pub error: Option<String>,
}

pub fn frame_consistency_study(ladder: &EpsilonLadder) -> StudyReport<FrameConsistencyRow> {
    let rows: Vec<FrameConsistencyRow> = ladder
        .epsilons
        .par_iter()
        .map(|&eps| {
            let result = frame_consistency(ladder, eps);
            FrameConsistencyRow {
                epsilon: eps,
                relative_error: *result.as_ref().map(|r| &r.0).unwrap_or(&f64::NAN),
                samples: result.as_ref().map(|r| r.1).unwrap_or(0),
                error: record(&result),
            }
        })
        .collect();
    let flags = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("run aborted: {e}")))
        .collect();
    StudyReport {
        rows,
        fit: None,
        flags,
        monotonicity_violations: Vec::new(),
    }
}

fn frame_consistency(ladder: &EpsilonLadder, eps: f64) -> Result<(f64, usize)> {
    let params = ladder.params(eps)?;
    let comb = TimeGrid::graded(eps, ladder.horizon);
    let taus = comb.times();
    let direct = run_flow(ladder, &params, Frame::Rescaled, &taus)?;
    let t_grid: Vec<f64> = taus.iter().map(|t| t / eps).collect();
    let original = run_flow(ladder, &params, Frame::Original, &t_grid)?;
    let rescaled = diffusive_rescale(&original, eps)?;
    let rescaled = resample(&rescaled, &taus)?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (a, b) in rescaled.iter().zip(&direct) {
        let d = (a.rho.sub(&b.rho).l2_norm_sqr() + a.v.sub(&b.v).l2_norm_sqr()).sqrt();
        num = num.max(d);
        den = den.max((b.rho.l2_norm_sqr() + b.v.l2_norm_sqr()).sqrt());
    }
    Ok((if den > 0.0 { num / den } else { num }, taus.len()))
}

/// Euler–Poisson trajectory sampled at `times` (stepping between samples).
pub fn run_flow(
    ladder: &EpsilonLadder,
    params: &ModelParams,
    frame: Frame,
    times: &[f64],
) -> Result<Vec<FlowState>> {
    let mut solver = EulerPoissonSolver::new(&ladder.grid, params, frame)?;
    let mut s = ladder
        .initial
        .flow_state(&ladder.grid, frame, params.epsilon)?;
    s.time = times.first().copied().unwrap_or(0.0);
    let mut out = vec![s.clone()];
    for w in times.windows(2) {
        s = solver.step(&s, w[1] - w[0])?;
        s.time = w[1];
        out.push(s.clone());
    }
    Ok(out)
}
