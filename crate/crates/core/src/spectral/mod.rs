//! Periodic-grid Fourier infrastructure.
//!
//! Coefficients follow the mean-type convention
//! `û_k = N⁻¹ Σ_x u(x) e^{-iξ_k·x}` with `ξ_k = (2π/L) k`, so that
//! `u(x) = Σ_k û_k e^{iξ_k·x}` and a single mode `e^{iξ·x}` has coefficient 1.
//! L² norms are taken against Lebesgue measure on the torus `[0, L)^d`, i.e.
//! `‖u‖² = ∫|u|² = L^d Σ_k |û_k|²`.

mod fft;
mod field;
mod grid;
mod ops;
mod random;
pub mod snapshot;

pub use field::{SpectralField, VectorField};
pub use grid::Grid;
pub use ops::{
    curl_2d, divergence, forward_transform, gradient, helmholtz_project, inverse_transform,
    laplacian, multiply, poisson_inverse_gradient, poisson_inverse_gradient_mean_free,
    MEAN_TOLERANCE,
};
pub use random::random_real_field;
