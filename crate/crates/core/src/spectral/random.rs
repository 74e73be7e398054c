use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::SpectralField;
use super::grid::Grid;

/// Random real-data field with independent uniform coefficients on the modes
/// whose integer wavevector norm lies in `[k_min, k_max]`.
///
/// Each conjugate pair draws from its own ChaCha stream keyed by
/// `(seed, mode index)`, so the result does not depend on evaluation order.
/// The mean and Nyquist planes are left empty.
pub fn random_real_field(grid: &Grid, seed: u64, k_min: f64, k_max: f64) -> SpectralField {
    let table = grid.table();
    let nyq = (grid.n() / 2) as i64;
    let mut coeffs = vec![Complex64::default(); grid.len()];
    for idx in 1..grid.len() {
        let partner = table.mirror[idx];
        if partner < idx {
            continue;
        }
        let k = grid.mode_index(idx);
        let k = &k[..grid.dim()];
        if k.contains(&nyq) {
            continue;
        }
        let knorm = (k.iter().map(|&ki| (ki * ki) as f64).sum::<f64>()).sqrt();
        if knorm < k_min || knorm > k_max {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if partner == idx {
            coeffs[idx] = Complex64::new(z.re, 0.0);
        } else {
            coeffs[idx] = z;
            coeffs[partner] = z.conj();
        }
    }
    SpectralField::from_coeffs(grid, coeffs).expect("length matches grid")
}
