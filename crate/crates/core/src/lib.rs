//! Pseudo-spectral laboratory for the damped Euler–Poisson system and its
//! high-relaxation limit, the parabolic–elliptic Keller–Segel system.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: periodic grids, FFTs, differential operators, Poisson
//!   inversion, Helmholtz projection and binary field snapshots.
//! * [`littlewood_paley`]: smooth dyadic partitions of unity, block operators
//!   and homogeneous Besov norms restricted to frequency regimes.
//! * [`linear_analysis`]: exact per-mode analysis of the linearised system:
//!   symbol matrix, eigenvalues, matrix exponentials, Lyapunov functionals.
//! * [`euler_poisson`] / [`keller_segel`]: nonlinear exponential-integrator
//!   solvers.
//! * [`limit_harness`]: ε-ladders, damped-mode and convergence-rate studies.
//! * [`cli`]: configuration, run orchestration and reporting.

pub mod cli;
pub mod error;
pub mod euler_poisson;
pub mod keller_segel;
pub mod limit_harness;
pub mod linear_analysis;
pub mod littlewood_paley;
pub mod model;
pub mod series;
pub mod spectral;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use spectral::{Grid, SpectralField, VectorField};
