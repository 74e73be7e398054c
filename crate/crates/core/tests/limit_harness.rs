use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxlab::euler_poisson::{linear_coefficients, FlowState, Frame};
use relaxlab::keller_segel::linear_rate;
use relaxlab::limit_harness::*;
use relaxlab::linear_analysis::evolve_linear_fields;
use relaxlab::littlewood_paley::DyadicPartition;
use relaxlab::{Error, Grid, ModelParams, SpectralField};

fn base() -> ModelParams {
    ModelParams::new(1.0, 2.0, 1.0, 0.1).unwrap()
}

fn ladder(eps: Vec<f64>, n: usize, init: InitialData, horizon: f64) -> EpsilonLadder {
    let grid = Grid::new(2, n, 8.0 * PI).unwrap();
    EpsilonLadder::new(eps, base(), grid, init, horizon).unwrap()
}

mod slope {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let lin: Vec<_> = eps.iter().map(|&e| (e, 3.0 * e)).collect();
        let f = fit_slope(&lin).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.max_residual < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        let quad: Vec<_> = eps.iter().map(|&e| (e, 2.0 * e * e)).collect();
        assert!((fit_slope(&quad).unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let pairs: Vec<_> = (0..6)
                .map(|k| {
                    let e = 0.4 * 0.5f64.powi(k);
                    (e, 5.0 * e * (1.0 + 0.05 * rng.random_range(-1.0..1.0)))
                })
                .collect();
            let f = fit_slope(&pairs).unwrap();
            assert!((f.slope - 1.0).abs() < 0.1, "slope {}", f.slope);
            assert!(f.band.0 <= f.slope && f.slope <= f.band.1);
        }
    }

    #[test]
    fn nonpositive_values_are_excluded() {
        let pairs = [
            (0.4, 0.8),
            (0.2, 0.0),
            (0.1, 0.2),
            (0.05, -1.0),
            (0.025, 0.05),
        ];
        let f = fit_slope(&pairs).unwrap();
        assert_eq!(f.excluded, vec![1, 3]);
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(matches!(fit_slope(&pairs[..3]), Err(Error::Degenerate(_))));
    }
}

mod rescaling {
    use super::*;

    #[test]
    fn unit_epsilon_is_identity() {
        let l = ladder(
            vec![0.1],
            16,
            InitialData::random_band(0.01, 1.0, 4.0, 3),
            1.0,
        );
        let s = l.initial.flow_state(&l.grid, Frame::Original, 0.1).unwrap();
        let mut s2 = s.clone();
        s2.time = 0.7;
        let out = diffusive_rescale(&[s.clone(), s2], 1.0).unwrap();
        assert_eq!(out[1].time, 0.7);
        assert_eq!(out[1].v.sub(&s.v).max_abs_coeff(), 0.0);
        assert_eq!(out[0].rho.sub(&s.rho).max_abs_coeff(), 0.0);
    }

    #[test]
    fn equilibrium_maps_to_equilibrium() {
        let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
        let traj: Vec<FlowState> = (0..3)
            .map(|k| {
                let mut s = FlowState::equilibrium(&grid, Frame::Original);
                s.time = k as f64;
                s
            })
            .collect();
        let out = diffusive_rescale(&traj, 0.2).unwrap();
        assert!(out
            .iter()
            .all(|s| s.rho.max_abs_coeff() == 0.0 && s.v.max_abs_coeff() == 0.0));
        assert_eq!(out[2].time, 0.4);
        assert!(matches!(resample(&out, &[0.5]), Err(Error::Range(_))));
        let mid = resample(&out, &[0.3]).unwrap();
        assert_eq!(mid[0].time, 0.3);
    }

    #[test]
    fn interpolation_is_linear() {
        let grid = Grid::new(1, 16, 2.0 * PI).unwrap();
        let a = FlowState::new(
            0.0,
            Frame::Rescaled,
            SpectralField::from_fn(&grid, |x| x[0].sin()),
            relaxlab::VectorField::zeros(&grid),
        )
        .unwrap();
        let mut b = a.clone();
        b.time = 2.0;
        b.rho = b.rho.scaled(3.0);
        let mid = resample(&[a.clone(), b], &[0.5]).unwrap();
        assert!(mid[0].rho.sub(&a.rho.scaled(1.5)).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn frames_agree_in_linear_regime() {
        let l = ladder(
            vec![0.2, 0.1],
            32,
            InitialData::random_band(1e-6, 1.0, 6.0, 5),
            1.0,
        );
        let r = frame_consistency_study(&l);
        assert!(r.complete());
        for row in &r.rows {
            assert!(
                row.relative_error <= 1e-6,
                "eps {}: {}",
                row.epsilon,
                row.relative_error
            );
        }
    }
}

mod studies {
    use super::*;

    #[test]
    fn single_point_ladder_has_no_slope() {
        let l = ladder(vec![0.2], 16, InitialData::gaussian(0.01, 2.0), 1.0);
        let r = damped_mode_decay_study(&l);
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].integral > 0.0 && r.rows[0].error.is_none());
        assert!(r.fit.is_none() && !r.flags.is_empty());
        assert!(r.summary_line(0.8, 1.2).ends_with("pass=false"));
    }

    #[test]
    fn zero_data_gives_zero_integrals() {
        let l = ladder(
            vec![0.2, 0.1, 0.05],
            16,
            InitialData::gaussian(0.0, 2.0),
            1.0,
        );
        let r = damped_mode_decay_study(&l);
        assert!(r.rows.iter().all(|row| row.integral == 0.0));
        assert!(r.fit.is_none());
        assert!(r.flags.iter().any(|f| f.contains("zero")));
    }

    #[test]
    fn self_convergence_is_exactly_zero() {
        let l = ladder(
            vec![0.2, 0.1, 0.05],
            16,
            InitialData::gaussian(0.05, 2.0),
            1.0,
        );
        let r = convergence_study_with(&l, DensitySource::KellerSegel);
        for row in &r.rows {
            assert_eq!(
                (row.sup_norm, row.high_integral, row.low_integral),
                (0.0, 0.0, 0.0)
            );
        }
        assert!(r.fit.is_none());
    }

    #[test]
    fn aborted_runs_are_flagged() {
        // a density dip below the vacuum guard aborts every member
        let l = ladder(
            vec![0.2, 0.1, 0.05],
            16,
            InitialData::single_mode(0.95, [1, 0, 0]),
            1.0,
        );
        let r = ep_ks_convergence_study(&l);
        assert!(!r.complete());
        assert!(r
            .rows
            .iter()
            .all(|row| row.error.as_deref().is_some_and(|e| e.contains("vacuum"))));
    }

    #[test]
    fn matches_per_mode_propagator_oracle() {
        // tiny data: both solvers are exact on the linear part, so the harness
        // must reproduce the difference of the two per-mode propagators. Much
        // smaller amplitudes lose digits to roundoff in P(ϱ̄ + r).
        let amp = 1e-7;
        let horizon = 8.0;
        let eps = 0.2;
        let l = ladder(
            vec![eps],
            32,
            InitialData::random_band(amp, 1.0, 6.0, 21),
            horizon,
        );
        let row = &ep_ks_convergence_study(&l).rows[0];
        assert!(row.error.is_none(), "{:?}", row.error);
        assert_eq!(row.horizon, horizon);

        let p = base().with_epsilon(eps).unwrap();
        let coeffs = linear_coefficients(&p, Frame::Rescaled);
        let s0 = l.initial.flow_state(&l.grid, Frame::Rescaled, eps).unwrap();
        let part = DyadicPartition::for_physical_frame(&l.grid, eps).unwrap();
        let (mut sup, mut hi, mut lo) = (0.0f64, Vec::new(), Vec::new());
        let times = TimeGrid::graded(eps, horizon).times();
        for &t in &times {
            let (rho_ep, _) = evolve_linear_fields(&coeffs, &s0.rho, &s0.v, t).unwrap();
            let rho_ks = s0.rho.map_modes(|idx| {
                let k2 = l.grid.wavevector(idx).iter().map(|x| x * x).sum::<f64>();
                Complex64::new((-linear_rate(&p, k2) * t).exp(), 0.0)
            });
            let [a, b, c] = difference_norms(&rho_ks.sub(&rho_ep), &part);
            sup = sup.max(a);
            hi.push(b);
            lo.push(c);
        }
        let trap = |v: &[f64]| {
            times
                .windows(2)
                .zip(v.windows(2))
                .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
                .sum::<f64>()
        };
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(row.sup_norm, sup) < 1e-6, "{} vs {}", row.sup_norm, sup);
        assert!(
            rel(row.low_integral, trap(&lo)) < 1e-6,
            "{} vs {}",
            row.low_integral,
            trap(&lo)
        );
        if trap(&hi) > 0.0 {
            assert!(rel(row.high_integral, trap(&hi)) < 1e-6);
        }
    }
}
