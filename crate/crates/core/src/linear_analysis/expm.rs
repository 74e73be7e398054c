//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants (orders 3, 5, 7, 9, 13), following Higham's 2005 selection
//! thresholds.

use nalgebra::{ComplexField, DMatrix};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120., 60., 12., 1.];
const B5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const B7: [f64; 8] = [
    17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.,
];
const B9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const B13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

fn one_norm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scale<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, s: f64) -> DMatrix<T> {
    a.map(|x| x * T::from_real(s))
}

/// Low-order (m ≤ 9) numerator/denominator pieces U (odd) and V (even).
fn pade_low<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    b: &[f64],
) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u_inner = scale(&ident, b[1]);
    let mut v = scale(&ident, b[0]);
    let m = b.len() - 1;
    for k in (2..=m).step_by(2) {
        power = &power * &a2;
        v += scale(&power, b[k]);
        if k < m {
            u_inner += scale(&power, b[k + 1]);
        }
    }
    (a * u_inner, v)
}

fn pade_13<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let b = &B13;
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]);
    let u_inner =
        &a6 * u_hi + scale(&a6, b[7]) + scale(&a4, b[5]) + scale(&a2, b[3]) + scale(&ident, b[1]);
    let v_hi = scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]);
    let v =
        &a6 * v_hi + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&ident, b[0]);
    (a * u_inner, v)
}

/// e^A for a square real or complex matrix.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(a, &B3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(a, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(a, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(a, &B9);
        (u, v, 0)
    } else {
        let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
        let scaled = scale(a, 2f64.powi(-s));
        let (u, v) = pade_13(&scaled);
        (u, v, s)
    };
    let numer = &v + &u;
    let denom = v - u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for admissible norms");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// `(e^A, φ₁(A), φ₂(A))` with φ₁(z) = (e^z − 1)/z and φ₂(z) = (e^z − 1 − z)/z²,
/// read off the exponential of the block matrix `[[A, I, 0], [0, 0, I], [0, 0, 0]]`.
pub fn phi_functions<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let mut big = DMatrix::<T>::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        big[(i, n + i)] = T::one();
        big[(n + i, 2 * n + i)] = T::one();
    }
    let e = expm(&big);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    /// Truncated Taylor series with many terms, for small-norm matrices.
    fn taylor(a: &DMatrix<Complex64>, terms: usize) -> DMatrix<Complex64> {
        let n = a.nrows();
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..terms {
            term = &term * a / Complex64::new(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn every_pade_branch_matches_taylor() {
        let base = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(0.1, 0.2),
                Complex64::new(-0.3, 0.0),
                Complex64::new(0.05, 0.1),
                Complex64::new(0.2, -0.1),
                Complex64::new(0.0, 0.4),
                Complex64::new(0.1, 0.0),
                Complex64::new(-0.2, 0.0),
                Complex64::new(0.3, 0.3),
                Complex64::new(-0.1, -0.2),
            ],
        );
        for s in [0.01, 0.2, 1.0, 2.5, 6.0, 20.0] {
            let a = &base * Complex64::new(s, 0.0);
            // e^A = (e^{A/2^k})^{2^k}, with the inner factor by Taylor
            let k = 8;
            let mut reference = taylor(&(&a / Complex64::new(2f64.powi(k), 0.0)), 30);
            for _ in 0..k {
                reference = &reference * &reference;
            }
            let got = expm(&a);
            let err = (&got - &reference).norm() / reference.norm();
            assert!(err < 1e-12, "scale {s}: rel err {err}");
        }
    }

    #[test]
    fn diagonal_matrix() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-30.0, 0.5, 3.0]));
        let e = expm(&a);
        for (i, d) in [-30.0f64, 0.5, 3.0].iter().enumerate() {
            assert!((e[(i, i)] - d.exp()).abs() <= 1e-13 * d.exp());
        }
    }

    #[test]
    fn phi_functions_scalar() {
        for z in [-50.0f64, -1.0, -1e-6, 0.0, 0.3] {
            let a = DMatrix::from_element(1, 1, z);
            let (e, p1, p2) = phi_functions(&a);
            let (ez, phi1, phi2) = if z == 0.0 {
                (1.0, 1.0, 0.5)
            } else if z.abs() < 1e-3 {
                (
                    z.exp(),
                    1.0 + z / 2.0 + z * z / 6.0,
                    0.5 + z / 6.0 + z * z / 24.0,
                )
            } else {
                (z.exp(), z.exp_m1() / z, (z.exp_m1() - z) / (z * z))
            };
            assert!((e[(0, 0)] - ez).abs() < 1e-13);
            assert!((p1[(0, 0)] - phi1).abs() < 1e-13, "z={z}");
            assert!((p2[(0, 0)] - phi2).abs() < 1e-12, "z={z}");
        }
    }
}
