use std::f64::consts::PI;

use num_complex::Complex64;
use relaxlab::euler_poisson::*;
use relaxlab::linear_analysis::{eigenvalues, evolve_linear_fields};
use relaxlab::spectral::{
    divergence, gradient, laplacian, poisson_inverse_gradient_mean_free, random_real_field,
};
use relaxlab::{Error, Grid, ModelParams, SpectralField, VectorField};

fn params(eps: f64) -> ModelParams {
    ModelParams::new(1.0, 2.0, 1.0, eps).unwrap()
}

fn small_state(grid: &Grid, amp: f64, seed: u64, frame: Frame) -> FlowState {
    let band = |s| random_real_field(grid, s, 0.0, 6.0).dealiased();
    let norm = |f: SpectralField| {
        let m = f.to_physical().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        f.scaled(amp / m)
    };
    let rho = norm(band(seed));
    let v = VectorField::new(
        (0..grid.dim())
            .map(|a| norm(band(seed + 1 + a as u64)))
            .collect(),
    )
    .unwrap();
    FlowState::new(0.0, frame, rho, v).unwrap()
}

fn rel_err(a: &FlowState, rho: &SpectralField, v: &VectorField) -> f64 {
    let num = a.rho.sub(rho).l2_norm_sqr() + a.v.sub(v).l2_norm_sqr();
    let den = rho.l2_norm_sqr() + v.l2_norm_sqr();
    (num / den).sqrt()
}

#[test]
fn pressure_and_makino_examples() {
    let p = params(0.1);
    assert_eq!(pressure(&[1.0], &p).unwrap(), vec![1.0]);
    let q = ModelParams::new(0.5, 1.4, 1.0, 0.1).unwrap();
    let val = pressure(&[2.0], &q).unwrap()[0];
    assert!((val - 0.5 * (1.4 * 2f64.ln()).exp()).abs() < 1e-14);
    let h = 1e-6;
    let fd = (p.pressure(1.0 + h) - p.pressure(1.0)) / h;
    assert!((fd - p.sound_speed_sqr()).abs() / p.sound_speed_sqr() < 1e-5);
    assert!(matches!(
        pressure(&[1.0, 0.0], &p),
        Err(Error::Vacuum { .. })
    ));

    let c = makino_transform(&[p.rho_bar], &p).unwrap()[0];
    assert_eq!(c, p.c_bar());
    let cube = ModelParams::new(1.0 / 3.0, 3.0, 1.0, 0.1).unwrap();
    let c = makino_transform(&[0.7, 2.5], &cube).unwrap();
    assert!((c[0] - 0.7).abs() < 1e-15 && (c[1] - 2.5).abs() < 1e-15);
    let rho: Vec<f64> = (0..50).map(|i| 0.2 + 0.1 * i as f64).collect();
    let back = makino_inverse(&makino_transform(&rho, &q).unwrap(), &q).unwrap();
    for (a, b) in rho.iter().zip(&back) {
        assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn equilibrium_is_fixed() {
    let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
    let p = params(0.1);
    let eq = FlowState::equilibrium(&grid, Frame::Rescaled);
    let t = rhs_rescaled(&eq, &p).unwrap();
    assert_eq!(t.rho.max_abs_coeff(), 0.0);
    assert!(t.v.max_abs_coeff() < 1e-15);
    let mut solver = EulerPoissonSolver::new(&grid, &p, Frame::Rescaled).unwrap();
    let out = solver.step(&eq, 0.3).unwrap();
    assert!(out.rho.max_abs_coeff() < 1e-15 && out.v.max_abs_coeff() < 1e-15);
    let w = damped_mode(&eq, &p).unwrap();
    assert!(w.max_abs_coeff() < 1e-15);
}

#[test]
fn rescaled_symbol_maps_to_normalised_frame() {
    let p = ModelParams::new(0.7, 1.6, 1.3, 0.2).unwrap();
    let c = linear_coefficients(&p, Frame::Rescaled);
    let eps = p.epsilon;
    for xi in [[0.3, 0.1], [1.0, -2.0], [0.05, 0.0]] {
        let m = c.symbol(&xi).unwrap();
        let numeric = m.schur().eigenvalues().unwrap();
        let k: f64 = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let xi_n = [eps * p.sound_speed_sqr().sqrt() * k, 0.0];
        let eps_n = eps * p.rho_bar.sqrt();
        for lam in eigenvalues(&xi_n, eps_n).unwrap().all() {
            let scaled = lam / (eps * eps);
            let dist = numeric
                .iter()
                .map(|z| (z - scaled).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(dist < 1e-9 * scaled.norm().max(1.0), "{dist}");
        }
    }
}

#[test]
fn small_density_mode_matches_linearisation() {
    let grid = Grid::new(2, 16, 4.0 * PI).unwrap();
    let p = params(0.1);
    let amp = 1e-6;
    let rho = SpectralField::from_fn(&grid, |x| amp * (0.5 * x[0] + x[1]).cos());
    let state =
        FlowState::new(0.0, Frame::Rescaled, rho.clone(), VectorField::zeros(&grid)).unwrap();
    let t = rhs_rescaled(&state, &p).unwrap();
    assert!(t.rho.max_abs_coeff() < 1e-20);
    let eps2 = p.epsilon * p.epsilon;
    let mut expect = gradient(&rho).scaled(-p.enthalpy_slope() / eps2);
    expect.axpy(-1.0 / eps2, &poisson_inverse_gradient_mean_free(&rho));
    let err = t.v.sub(&expect).l2_norm() / expect.l2_norm();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn mass_is_conserved() {
    let grid = Grid::new(2, 32, 8.0 * PI).unwrap();
    let p = params(0.1);
    let mut s = small_state(&grid, 0.05, 3, Frame::Rescaled);
    s.rho.coeffs_mut()[0] = Complex64::new(0.01, 0.0);
    let m0 = s.mass();
    let t = rhs_rescaled(&s, &p).unwrap();
    assert_eq!(t.rho.coeffs()[0], Complex64::new(0.0, 0.0));
    let mut solver = EulerPoissonSolver::new(&grid, &p, Frame::Rescaled).unwrap();
    let end = solver.advance_to(&s, 1.0, 0.01).unwrap();
    assert!((end.mass() - m0).abs() <= 1e-12 * m0.abs().max(1.0));
}

fn linear_regime(eps: f64) -> f64 {
    let grid = Grid::new(2, 64, 8.0 * PI).unwrap();
    let p = params(eps);
    let s0 = small_state(&grid, 1e-6, 17, Frame::Rescaled);
    let mut solver = EulerPoissonSolver::new(&grid, &p, Frame::Rescaled).unwrap();
    let coeffs = linear_coefficients(&p, Frame::Rescaled);
    let mut s = s0.clone();
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        s = solver.advance_to(&s, k as f64, 0.02).unwrap();
        let (r, v) = evolve_linear_fields(&coeffs, &s0.rho, &s0.v, k as f64).unwrap();
        worst = worst.max(rel_err(&s, &r, &v));
    }
    worst
}

#[test]
fn linear_regime_matches_exact_propagator() {
    for eps in [0.1, 0.05] {
        let err = linear_regime(eps);
        assert!(err < 1e-5, "eps {eps}: {err}");
    }
}

fn run(grid: &Grid, p: &ModelParams, s0: &FlowState, t: f64, dt: f64) -> FlowState {
    let mut solver = EulerPoissonSolver::new(grid, p, s0.frame).unwrap();
    solver.advance_to(s0, t, dt).unwrap()
}

#[test]
fn second_order_self_convergence() {
    let grid = Grid::new(2, 32, 8.0 * PI).unwrap();
    let p = params(0.2);
    let s0 = small_state(&grid, 0.05, 23, Frame::Rescaled);
    let t = 0.5;
    let dt = 0.05;
    let reference = run(&grid, &p, &s0, t, dt / 8.0);
    let err = |h: f64| {
        let s = run(&grid, &p, &s0, t, h);
        rel_err(&s, &reference.rho, &reference.v)
    };
    let ratio = err(dt) / err(dt / 2.0);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn frames_agree() {
    let grid = Grid::new(2, 32, 8.0 * PI).unwrap();
    let p = params(0.2);
    let eps = p.epsilon;
    let s_orig = small_state(&grid, 0.02, 41, Frame::Original);
    let s_resc = s_orig.to_frame(Frame::Rescaled, eps);
    let tau = 0.4;
    let dtau = 0.01;
    let direct = run(&grid, &p, &s_resc, tau, dtau);
    let via = run(&grid, &p, &s_orig, tau / eps, dtau / eps).to_frame(Frame::Rescaled, eps);
    let err = rel_err(&via, &direct.rho, &direct.v);
    assert!(err < 1e-10, "{err}");
    assert!((via.time - tau).abs() < 1e-14);
}

#[test]
fn damped_mode_cancellation() {
    let grid = Grid::new(2, 32, 8.0 * PI).unwrap();
    let p = params(0.1);
    let s = small_state(&grid, 0.05, 5, Frame::Rescaled);
    let rho_phys: Vec<f64> = s.rho.to_physical().iter().map(|r| p.rho_bar + r).collect();
    let w0 = damped_mode(&s, &p).unwrap();
    let minus_v = w0.sub(&s.v);
    let cancelled =
        FlowState::new(0.0, Frame::Rescaled, s.rho.clone(), minus_v.scaled(-1.0)).unwrap();
    assert!(damped_mode(&cancelled, &p).unwrap().max_abs_coeff() < 1e-15);
    assert_eq!(rho_phys.len(), grid.len());
}

/// div(ϱ̃W̃) equals ΔP(ϱ̃) + div(ϱ̃∇(−Δ)⁻¹(ϱ̃ − ϱ̄)) − ∂ₜϱ̃ along a trajectory.
#[test]
fn density_equation_rewritten_with_damped_mode() {
    let grid = Grid::new(2, 128, 8.0 * PI).unwrap();
    let p = params(0.1);
    let s0 = small_state(&grid, 0.01, 9, Frame::Rescaled);
    let mut solver = EulerPoissonSolver::new(&grid, &p, Frame::Rescaled).unwrap();
    let s = solver.advance_to(&s0, 0.05, 1e-3).unwrap();
    let rho: Vec<f64> = s.rho.to_physical().iter().map(|r| p.rho_bar + r).collect();
    let mul = |f: &SpectralField| {
        let q: Vec<f64> = f
            .to_physical()
            .iter()
            .zip(&rho)
            .map(|(a, b)| a * b)
            .collect();
        SpectralField::from_physical(&grid, &q).unwrap()
    };
    let w = damped_mode(&s, &p).unwrap();
    let lhs = divergence(&VectorField::new(w.components.iter().map(mul).collect()).unwrap());
    let pr: Vec<f64> = rho.iter().map(|r| p.pressure(*r)).collect();
    let lap_p = laplacian(&SpectralField::from_physical(&grid, &pr).unwrap());
    let gv = poisson_inverse_gradient_mean_free(&s.rho);
    let drift = divergence(&VectorField::new(gv.components.iter().map(mul).collect()).unwrap());
    let d_rho = rhs_rescaled(&s, &p).unwrap().rho;
    let rhs_side = lap_p.add(&drift).sub(&d_rho);
    let err = lhs.sub(&rhs_side).l2_norm() / lhs.l2_norm();
    assert!(err < 1e-8, "{err}");
}

#[test]
fn step_size_rule_enforced() {
    let grid = Grid::new(1, 16, 2.0 * PI).unwrap();
    let p = params(0.1);
    let v = VectorField::new(vec![SpectralField::from_fn(&grid, |x| 10.0 * x[0].sin())]).unwrap();
    let s = FlowState::new(0.0, Frame::Rescaled, SpectralField::zeros(&grid), v).unwrap();
    let mut solver = EulerPoissonSolver::new(&grid, &p, Frame::Rescaled).unwrap();
    assert!(matches!(solver.step(&s, 0.1), Err(Error::StepSize { .. })));
    assert!(matches!(solver.step(&s, 0.0), Err(Error::Precondition(_))));
    let dt = solver.max_step(&s);
    assert!(solver.step(&s, dt).is_ok());
}

#[test]
fn vacuum_guard_and_blow_up() {
    let grid = Grid::new(1, 16, 2.0 * PI).unwrap();
    let p = params(0.1);
    let rho = SpectralField::from_fn(&grid, |x| -0.95 * x[0].cos());
    let s = FlowState::new(0.0, Frame::Rescaled, rho, VectorField::zeros(&grid)).unwrap();
    assert!(matches!(rhs_rescaled(&s, &p), Err(Error::Vacuum { .. })));
    let mut nan = FlowState::equilibrium(&grid, Frame::Rescaled);
    nan.rho.coeffs_mut()[1] = Complex64::new(f64::NAN, 0.0);
    assert!(matches!(rhs_rescaled(&nan, &p), Err(Error::BlowUp { .. })));
}

mod functional {
    use super::*;
    use relaxlab::littlewood_paley::{besov_norm, besov_norm_vector, DyadicPartition, Regime};

    #[test]
    fn zero_trajectory_gives_zero() {
        let grid = Grid::new(2, 32, 16.0 * PI).unwrap();
        let p = params(0.1);
        let part = DyadicPartition::for_physical_frame(&grid, p.epsilon).unwrap();
        let traj: Vec<FlowState> = (0..4)
            .map(|k| {
                let mut s = FlowState::equilibrium(&grid, Frame::Rescaled);
                s.time = 0.1 * k as f64;
                s
            })
            .collect();
        let f = ep_apriori_functional(&traj, &p, &part).unwrap();
        assert_eq!(f.components.len(), 11);
        assert!(f.total().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn frozen_state_integrates_linearly() {
        let grid = Grid::new(2, 32, 16.0 * PI).unwrap();
        let p = params(0.1);
        let part = DyadicPartition::for_physical_frame(&grid, p.epsilon).unwrap();
        let s = small_state(&grid, 0.01, 2, Frame::Original);
        let traj: Vec<FlowState> = (0..=10)
            .map(|k| FlowState {
                time: 0.3 * k as f64,
                ..s.clone()
            })
            .collect();
        let f = ep_apriori_functional(&traj, &p, &part).unwrap();
        let t_end = 3.0;
        let int_v = f
            .component("int_v_l")
            .unwrap()
            .values
            .last()
            .copied()
            .unwrap();
        let inst = besov_norm_vector(&s.v, 1.0, Regime::Low, &part);
        assert!((int_v - t_end * inst).abs() <= 1e-12 * int_v);
        let sup_rho = f.component("sup_rho_l").unwrap().values[5];
        assert!((sup_rho - besov_norm(&s.rho, 0.0, Regime::Low, &part)).abs() < 1e-15);
    }

    /// The running functional is nondecreasing by construction and stays
    /// within a modest multiple of its initial value on a small-data run.
    #[test]
    fn functional_is_monotone_and_bounded() {
        let grid = Grid::new(2, 64, 16.0 * PI).unwrap();
        let p = params(0.2);
        let part = DyadicPartition::for_physical_frame(&grid, p.epsilon).unwrap();
        let s0 = small_state(&grid, 0.01, 12, Frame::Rescaled);
        let mut solver = EulerPoissonSolver::new(&grid, &p, Frame::Rescaled).unwrap();
        let mut traj = vec![s0.clone()];
        let mut s = s0;
        for k in 1..=40 {
            s = solver.advance_to(&s, 0.05 * k as f64, 0.005).unwrap();
            traj.push(s.clone());
        }
        let f = ep_apriori_functional(&traj, &p, &part).unwrap();
        let z = f.total();
        assert!(z.windows(2).all(|w| w[1] >= w[0]));
        assert!(
            z[z.len() - 1] <= 10.0 * z[0],
            "{} vs {}",
            z[z.len() - 1],
            z[0]
        );
        assert!(!f.truncated(), "{:?}", f.empty_regimes);
    }

    /// Small data decays below 10% of its initial Ḃ^{d/2} size without
    /// intermediate growth beyond a factor 2.
    #[test]
    fn small_data_decays() {
        let grid = Grid::new(2, 32, 16.0 * PI).unwrap();
        let p = params(0.1);
        let part = DyadicPartition::for_physical_frame(&grid, p.epsilon).unwrap();
        let size = |s: &FlowState| {
            besov_norm(&s.rho, 1.0, Regime::Full, &part)
                + besov_norm_vector(&s.v, 1.0, Regime::Full, &part)
        };
        let s0 = small_state(&grid, 0.01, 31, Frame::Rescaled);
        let n0 = size(&s0);
        let mut solver = EulerPoissonSolver::new(&grid, &p, Frame::Rescaled).unwrap();
        let mut s = s0;
        let mut t_star = None;
        for k in 1..=200 {
            s = solver.advance_to(&s, 0.1 * k as f64, 0.01).unwrap();
            let n = size(&s);
            assert!(n <= 2.0 * n0);
            if n <= 0.1 * n0 {
                t_star = Some(s.time);
                break;
            }
        }
        assert!(t_star.is_some());
    }
}
