//! Python module `pyrelaxlab`: grids, model parameters, the two solvers,
//! per-mode linear analysis, Besov norms and the ε-ladder studies.
//!
//! Fields cross the boundary as flat lists of physical samples in row-major
//! grid order. Configuration and precondition errors raise `ValueError`;
//! numerical failures (vacuum, blow-up, step rejection) raise `RuntimeError`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use relaxlab::euler_poisson::{self as ep, Frame};
use relaxlab::keller_segel as ks;
use relaxlab::limit_harness::{self as lh, EpsilonLadder, InitialData};
use relaxlab::linear_analysis as la;
use relaxlab::littlewood_paley::{self as lp, DyadicPartition, Regime};
use relaxlab::{Error, SpectralField};

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_frame(name: &str) -> PyResult<Frame> {
    match name {
        "original" => Ok(Frame::Original),
        "rescaled" => Ok(Frame::Rescaled),
        other => Err(PyValueError::new_err(format!(
            "frame must be 'original' or 'rescaled' (got '{other}')"
        ))),
    }
}

/// Accepts the short labels (`l`, `h`, `l-`, `l+`) or the long names.
fn parse_regime(name: &str) -> PyResult<Regime> {
    let short = match name {
        "low" => "l",
        "high" => "h",
        "very_low" => "l-",
        "medium" => "l+",
        other => other,
    };
    Regime::ALL
        .into_iter()
        .find(|r| r.label() == short)
        .ok_or_else(|| PyValueError::new_err(format!("unknown regime '{name}'")))
}

fn parse_init(
    kind: &str,
    amplitude: f64,
    width: f64,
    k: Vec<i64>,
    seed: u64,
) -> PyResult<InitialData> {
    match kind {
        "gaussian" => Ok(InitialData::gaussian(amplitude, width)),
        "single_mode" => {
            let mut idx = [0i64; 3];
            for (a, v) in k.iter().take(3).enumerate() {
                idx[a] = *v;
            }
            Ok(InitialData::single_mode(amplitude, idx))
        }
        "random_band" => Ok(InitialData::random_band(amplitude, 1.0, 8.0, seed)),
        other => Err(PyValueError::new_err(format!(
            "unknown initial data kind '{other}'"
        ))),
    }
}

/// Periodic grid `[0, L)^d` with `n` points per axis.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGrid {
    inner: relaxlab::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, n: usize, length: f64) -> PyResult<Self> {
        Ok(Self {
            inner: relaxlab::Grid::new(dim, n, length).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(dim={}, n={}, length={})",
            self.inner.dim(),
            self.inner.n(),
            self.inner.length()
        )
    }
}

/// Pressure law `P = A ρ^γ`, background density and relaxation parameter.
#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyModelParams {
    inner: relaxlab::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (a=1.0, gamma=2.0, rho_bar=1.0, epsilon=0.1))]
    fn new(a: f64, gamma: f64, rho_bar: f64, epsilon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: relaxlab::ModelParams::new(a, gamma, rho_bar, epsilon).map_err(py_err)?,
        })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn sound_speed_sqr(&self) -> f64 {
        self.inner.sound_speed_sqr()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(a={}, gamma={}, rho_bar={}, epsilon={})",
            p.a, p.gamma, p.rho_bar, p.epsilon
        )
    }
}

/// Euler–Poisson state: density perturbation and velocity.
#[pyclass(name = "FlowState", skip_from_py_object)]
#[derive(Clone)]
pub struct PyFlowState {
    inner: ep::FlowState,
}

#[pymethods]
impl PyFlowState {
    /// Initial data in `frame`; the velocity is given in the original frame.
    #[staticmethod]
    #[pyo3(signature = (grid, params, kind="gaussian", amplitude=0.01, frame="rescaled", width=2.0, k=vec![1], seed=1))]
    #[allow(clippy::too_many_arguments)]
    fn initial(
        grid: &PyGrid,
        params: &PyModelParams,
        kind: &str,
        amplitude: f64,
        frame: &str,
        width: f64,
        k: Vec<i64>,
        seed: u64,
    ) -> PyResult<Self> {
        let init = parse_init(kind, amplitude, width, k, seed)?;
        let inner = init
            .flow_state(&grid.inner, parse_frame(frame)?, params.inner.epsilon)
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    #[getter]
    fn frame(&self) -> &'static str {
        self.inner.frame.label()
    }

    /// Physical samples of `ρ − ρ̄`.
    fn density(&self) -> Vec<f64> {
        self.inner.rho.to_physical()
    }

    /// Physical samples of each velocity component.
    fn velocity(&self) -> Vec<Vec<f64>> {
        self.inner
            .v
            .components
            .iter()
            .map(|c| c.to_physical())
            .collect()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn min_density(&self, params: &PyModelParams) -> f64 {
        self.inner.min_density(&params.inner)
    }

    fn to_frame(&self, frame: &str, epsilon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.to_frame(parse_frame(frame)?, epsilon),
        })
    }

    /// `∫ ‖W̃‖` integrand: the Besov norm of the damped mode at index `s`.
    fn damped_mode_norm(&self, params: &PyModelParams, s: f64) -> PyResult<f64> {
        let w = ep::damped_mode(&self.inner, &params.inner).map_err(py_err)?;
        let part = DyadicPartition::for_physical_frame(self.inner.grid(), params.inner.epsilon)
            .map_err(py_err)?;
        Ok(lp::besov_norm_vector(&w, s, Regime::Full, &part))
    }
}

/// ETD2RK Euler–Poisson integrator.
#[pyclass(name = "EulerPoissonSolver", unsendable)]
pub struct PyEulerPoisson {
    inner: ep::EulerPoissonSolver,
}

#[pymethods]
impl PyEulerPoisson {
    #[new]
    #[pyo3(signature = (grid, params, frame="rescaled"))]
    fn new(grid: &PyGrid, params: &PyModelParams, frame: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ep::EulerPoissonSolver::new(&grid.inner, &params.inner, parse_frame(frame)?)
                .map_err(py_err)?,
        })
    }

    fn step(&mut self, state: &PyFlowState, dt: f64) -> PyResult<PyFlowState> {
        Ok(PyFlowState {
            inner: self.inner.step(&state.inner, dt).map_err(py_err)?,
        })
    }

    fn advance_to(&mut self, state: &PyFlowState, t_end: f64, dt: f64) -> PyResult<PyFlowState> {
        Ok(PyFlowState {
            inner: self
                .inner
                .advance_to(&state.inner, t_end, dt)
                .map_err(py_err)?,
        })
    }
}

/// Keller–Segel state `N − ρ̄`.
#[pyclass(name = "KSState", skip_from_py_object)]
#[derive(Clone)]
pub struct PyKSState {
    inner: ks::KSState,
}

#[pymethods]
impl PyKSState {
    #[staticmethod]
    #[pyo3(signature = (grid, kind="gaussian", amplitude=0.01, width=2.0, k=vec![1], seed=1))]
    fn initial(
        grid: &PyGrid,
        kind: &str,
        amplitude: f64,
        width: f64,
        k: Vec<i64>,
        seed: u64,
    ) -> PyResult<Self> {
        let init = parse_init(kind, amplitude, width, k, seed)?;
        Ok(Self {
            inner: init.ks_state(&grid.inner).map_err(py_err)?,
        })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    fn density(&self) -> Vec<f64> {
        self.inner.n.to_physical()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }
}

/// ETD2RK Keller–Segel integrator.
#[pyclass(name = "KellerSegelSolver", unsendable)]
pub struct PyKellerSegel {
    inner: ks::KellerSegelSolver,
}

#[pymethods]
impl PyKellerSegel {
    #[new]
    fn new(grid: &PyGrid, params: &PyModelParams) -> PyResult<Self> {
        Ok(Self {
            inner: ks::KellerSegelSolver::new(&grid.inner, &params.inner).map_err(py_err)?,
        })
    }

    fn step(&mut self, state: &PyKSState, dt: f64) -> PyResult<PyKSState> {
        Ok(PyKSState {
            inner: self.inner.step(&state.inner, dt).map_err(py_err)?,
        })
    }

    fn advance_to(&mut self, state: &PyKSState, t_end: f64, dt: f64) -> PyResult<PyKSState> {
        Ok(PyKSState {
            inner: self
                .inner
                .advance_to(&state.inner, t_end, dt)
                .map_err(py_err)?,
        })
    }
}

/// `(λ₊, λ₋, multiplicity of 1)` of the normalised symbol at `ξ`.
#[pyfunction]
fn eigenvalues(xi: Vec<f64>, epsilon: f64) -> PyResult<(Complex64, Complex64, usize)> {
    let e = la::eigenvalues(&xi, epsilon).map_err(py_err)?;
    Ok((e.plus, e.minus, e.unit_multiplicity()))
}

/// Low-frequency decay certification over the default sweep:
/// `(violations, samples, smallest margin)`.
#[pyfunction]
#[pyo3(signature = (dim=2))]
fn certify_low_frequency(dim: usize) -> PyResult<(usize, usize, f64)> {
    let r = la::certify_low_frequency_decay(&la::default_sweep(), dim).map_err(py_err)?;
    let margin = r.worst().map(|w| w.margin).unwrap_or(f64::NAN);
    Ok((r.violations(), r.rows.len(), margin))
}

/// `‖u‖_{Ḃ^s_{2,1}}` over `regime` of physical samples `values`.
#[pyfunction]
#[pyo3(signature = (grid, values, s, regime="full", epsilon=0.1))]
fn besov_norm(
    grid: &PyGrid,
    values: Vec<f64>,
    s: f64,
    regime: &str,
    epsilon: f64,
) -> PyResult<f64> {
    let u = SpectralField::from_physical(&grid.inner, &values).map_err(py_err)?;
    let part = DyadicPartition::for_physical_frame(&grid.inner, epsilon).map_err(py_err)?;
    Ok(lp::besov_norm(&u, s, parse_regime(regime)?, &part))
}

fn fit_dict<'py>(py: Python<'py>, fit: &lh::SlopeFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("slope", fit.slope)?;
    d.set_item("intercept", fit.intercept)?;
    d.set_item("residuals", fit.residuals.clone())?;
    d.set_item("max_residual", fit.max_residual)?;
    d.set_item("band", fit.band)?;
    d.set_item("excluded", fit.excluded.clone())?;
    Ok(d)
}

/// Least-squares slope of `log(error)` against `log(ε)`.
#[pyfunction]
fn fit_slope<'py>(py: Python<'py>, pairs: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyDict>> {
    fit_dict(py, &lh::fit_slope(&pairs).map_err(py_err)?)
}

/// Damped-mode or Euler–Poisson/Keller–Segel ladder study on a Gaussian
/// perturbation; returns `{"values": [...], "fit": {...} | None, "flags": [...]}`.
#[pyfunction]
#[pyo3(signature = (study, epsilons, grid, params, amplitude=0.01, width=2.0, horizon=5.0))]
#[allow(clippy::too_many_arguments)]
fn ladder_study<'py>(
    py: Python<'py>,
    study: &str,
    epsilons: Vec<f64>,
    grid: &PyGrid,
    params: &PyModelParams,
    amplitude: f64,
    width: f64,
    horizon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ladder = EpsilonLadder::new(
        epsilons,
        params.inner,
        grid.inner.clone(),
        InitialData::gaussian(amplitude, width),
        horizon,
    )
    .map_err(py_err)?;
    let (values, fit, flags) = match study {
        "damped_mode" => {
            let r = py.detach(|| lh::damped_mode_decay_study(&ladder));
            (
                r.rows.iter().map(|x| x.integral).collect::<Vec<_>>(),
                r.fit,
                r.flags,
            )
        }
        "ep_ks" => {
            let r = py.detach(|| lh::ep_ks_convergence_study(&ladder));
            (r.rows.iter().map(|x| x.sup_norm).collect(), r.fit, r.flags)
        }
        other => return Err(PyValueError::new_err(format!("unknown study '{other}'"))),
    };
    let d = PyDict::new(py);
    d.set_item("values", values)?;
    match &fit {
        Some(f) => d.set_item("fit", fit_dict(py, f)?)?,
        None => d.set_item("fit", py.None())?,
    }
    d.set_item("flags", flags)?;
    Ok(d)
}

#[pymodule]
fn pyrelaxlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyFlowState>()?;
    m.add_class::<PyEulerPoisson>()?;
    m.add_class::<PyKSState>()?;
    m.add_class::<PyKellerSegel>()?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(certify_low_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(besov_norm, m)?)?;
    m.add_function(wrap_pyfunction!(fit_slope, m)?)?;
    m.add_function(wrap_pyfunction!(ladder_study, m)?)?;
    Ok(())
}
