use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{expm, LinearCoefficients, I};
use crate::error::{Error, Result};

/// Constant in front of the low-frequency exponential bound.
pub const LOW_FREQUENCY_CONSTANT: f64 = 2.0;

pub const CERTIFICATION_CSV_HEADER: [&str; 6] =
    ["xi_norm", "eps", "t", "measured", "bound", "margin"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecaySample {
    pub xi_norm: f64,
    pub eps: f64,
    pub t: f64,
}

/// `2 e^{−(|ξ|²+ε²)t/8}`.
pub fn low_frequency_bound(xi_norm: f64, eps: f64, t: f64) -> f64 {
    LOW_FREQUENCY_CONSTANT * (-(xi_norm * xi_norm + eps * eps) * t / 8.0).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificationRow {
    pub xi_norm: f64,
    pub eps: f64,
    pub t: f64,
    /// Largest `|(ϱ̂, ŵ)(t)|` over unit initial data `|(ϱ̂₀, ŵ₀)| = 1`.
    pub measured: f64,
    pub bound: f64,
    /// `bound − measured`; negative on violation.
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct CertificationReport {
    pub dim: usize,
    pub rows: Vec<CertificationRow>,
}

impl CertificationReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.margin < 0.0).count()
    }

    pub fn worst(&self) -> Option<&CertificationRow> {
        self.rows
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CERTIFICATION_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record(&[
                format!("{:e}", r.xi_norm),
                format!("{:e}", r.eps),
                format!("{:e}", r.t),
                format!("{:e}", r.measured),
                format!("{:e}", r.bound),
                format!("{:e}", r.margin),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// `|ξ|`: 20 log-spaced points in [0.02, 0.95]; ε ∈ {0.01, 0.05, 0.1, 0.2};
/// `t`: 0 and 29 log-spaced points in [0.01, 40].
pub fn default_sweep() -> Vec<DecaySample> {
    let xis = logspace(0.02, 0.95, 20);
    let mut ts = vec![0.0];
    ts.extend(logspace(0.01, 40.0, 29));
    let mut out = Vec::with_capacity(xis.len() * 4 * ts.len());
    for &eps in &[0.01, 0.05, 0.1, 0.2] {
        for &xi_norm in &xis {
            for &t in &ts {
                out.push(DecaySample { xi_norm, eps, t });
            }
        }
    }
    out
}

/// Spectral norm of a 2×2 complex matrix.
fn spectral_norm_2x2(r: &[[Complex64; 2]; 2]) -> f64 {
    // eigenvalues of the Hermitian RᴴR
    let col = |j: usize| [r[0][j], r[1][j]];
    let (c0, c1) = (col(0), col(1));
    let a = c0[0].norm_sqr() + c0[1].norm_sqr();
    let d = c1[0].norm_sqr() + c1[1].norm_sqr();
    let b = (c0[0].conj() * c1[0] + c0[1].conj() * c1[1]).norm();
    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean + half_gap).sqrt()
}

fn certify_one(sample: &DecaySample, dim: usize) -> CertificationRow {
    let DecaySample { xi_norm, eps, t } = *sample;
    let mut xi = vec![0.0; dim];
    xi[0] = xi_norm;
    let m = LinearCoefficients::normalized(eps)
        .symbol(&xi)
        .expect("nonzero wavevector");
    let p = expm(&(m * Complex64::new(-t, 0.0)));
    let scale = (xi_norm * xi_norm + eps * eps).sqrt();
    // (ϱ̂, ŵ) basis vectors mapped into (ϱ̂, v̂); ŵ = iξ·v̂/scale
    let mut reduced = [[Complex64::new(0.0, 0.0); 2]; 2];
    for j in 0..2 {
        let mut z = DVector::zeros(dim + 1);
        if j == 0 {
            z[0] = Complex64::new(1.0, 0.0);
        } else {
            z[1] = Complex64::new(scale / xi_norm, 0.0) / I;
        }
        let out = &p * z;
        reduced[0][j] = out[0];
        reduced[1][j] = I * out[1] * xi_norm / scale;
    }
    let measured = spectral_norm_2x2(&reduced);
    let bound = low_frequency_bound(xi_norm, eps, t);
    CertificationRow {
        xi_norm,
        eps,
        t,
        measured,
        bound,
        margin: bound - measured,
    }
}

/// Checks `|(ϱ̂, ŵ)(t)| ≤ 2e^{−(|ξ|²+ε²)t/8}|(ϱ̂₀, ŵ₀)|` for every sample. The
/// measured value is the operator norm of the reduced propagator, i.e. the
/// worst case over all initial data. Transverse velocity does not enter ŵ.
pub fn certify_low_frequency_decay(
    samples: &[DecaySample],
    dim: usize,
) -> Result<CertificationReport> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Structure(format!(
            "dimension must be 1, 2 or 3 (got {dim})"
        )));
    }
    for s in samples {
        if !(s.xi_norm > 0.0 && s.eps >= 0.0 && s.t >= 0.0 && s.t.is_finite()) {
            return Err(Error::Precondition(format!(
                "sample |ξ| = {}, ε = {}, t = {} needs |ξ| > 0, ε ≥ 0, t ≥ 0",
                s.xi_norm, s.eps, s.t
            )));
        }
        let q = s.xi_norm * s.xi_norm + s.eps * s.eps;
        if q > 1.0 {
            return Err(Error::Precondition(format!(
                "sample |ξ| = {}, ε = {} has |ξ|² + ε² = {q} > 1, outside the low-frequency region",
                s.xi_norm, s.eps
            )));
        }
    }
    let rows = samples.par_iter().map(|s| certify_one(s, dim)).collect();
    Ok(CertificationReport { dim, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn spectral_norm_of_known_matrices() {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        assert!((spectral_norm_2x2(&[[one, z], [z, one]]) - 1.0).abs() < 1e-15);
        assert!((spectral_norm_2x2(&[[one, one], [z, z]]) - 2f64.sqrt()).abs() < 1e-15);
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let sv = m.singular_values()[0];
        let r = [[one, one * 2.0], [one * 3.0, one * 4.0]];
        assert!((spectral_norm_2x2(&r) - sv).abs() < 1e-13);
    }

    #[test]
    fn initial_time_is_trivially_bounded() {
        let report = certify_low_frequency_decay(
            &[DecaySample {
                xi_norm: 0.3,
                eps: 0.1,
                t: 0.0,
            }],
            2,
        )
        .unwrap();
        let row = report.rows[0];
        assert!((row.measured - 1.0).abs() < 1e-14);
        assert_eq!(row.bound, 2.0);
    }

    #[test]
    fn long_wave_example() {
        let row = certify_low_frequency_decay(
            &[DecaySample {
                xi_norm: 1e-3,
                eps: 0.1,
                t: 10.0,
            }],
            1,
        )
        .unwrap()
        .rows[0];
        assert!((row.bound - 2.0 * (-(1e-6 + 0.01) * 10.0 / 8.0f64).exp()).abs() < 1e-15);
        assert!(row.measured <= row.bound);
    }

    #[test]
    fn outside_region_rejected() {
        let err = certify_low_frequency_decay(
            &[DecaySample {
                xi_norm: 0.99,
                eps: 0.2,
                t: 1.0,
            }],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(err.to_string().contains("> 1"));
    }

    #[test]
    fn csv_has_documented_columns() {
        let report = certify_low_frequency_decay(
            &[DecaySample {
                xi_norm: 0.5,
                eps: 0.1,
                t: 1.0,
            }],
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("xi_norm,eps,t,measured,bound,margin\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
