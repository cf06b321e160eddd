use proptest::prelude::*;

use pnlab::corrector::project_out_kernel;
use pnlab::frac_operator::IntegralOperator;
use pnlab::grid::{FarField, Grid1D};
use pnlab::harness::ExperimentConfig;
use pnlab::particles::{integrate, IntegrateOptions, ParticleState};
use pnlab::potential::StressField;

fn operator() -> IntegralOperator<f64> {
    IntegralOperator::with_default_radius(Grid1D::new(-5.0, 5.0, 64).unwrap()).unwrap()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_affine_in_data_and_far_field(
        u in prop::collection::vec(-1.0f64..1.0, 64),
        w in prop::collection::vec(-1.0f64..1.0, 64),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        cu in (-1.0f64..1.0, -1.0f64..1.0),
        cw in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let op = operator();
        let fu = FarField::constant(cu.0, cu.1);
        let fw = FarField::constant(cw.0, cw.1);
        let mix: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let fm = FarField::constant(a * cu.0 + b * cw.0, a * cu.1 + b * cw.1);
        let lu = op.apply_fd(&u, &fu).unwrap();
        let lw = op.apply_fd(&w, &fw).unwrap();
        let lm = op.apply_fd(&mix, &fm).unwrap();
        let diff: Vec<f64> = lm.iter().zip(lu.iter().zip(&lw)).map(|(m, (x, y))| m - a * x - b * y).collect();
        prop_assert!(sup(&diff) < 1e-9 * (1.0 + sup(&lm)));
    }

    #[test]
    fn operator_annihilates_constants(c in -10.0f64..10.0) {
        let op = operator();
        let l = op.apply_fd(&[c; 64], &FarField::constant(c, c)).unwrap();
        prop_assert!(sup(&l) < 1e-11 * (1.0 + c.abs()));
    }

    #[test]
    fn free_particles_keep_order_and_center_of_mass(
        gaps in prop::collection::vec(0.2f64..2.0, 1..5),
        start in -3.0f64..0.0,
    ) {
        let mut x = vec![start];
        for g in &gaps {
            x.push(x[x.len() - 1] + g);
        }
        let mean0 = x.iter().sum::<f64>() / x.len() as f64;
        let s = ParticleState::new(0.0, x, 2.0).unwrap();
        let traj = integrate(&s, &StressField::zero(), 0.5, &IntegrateOptions::default()).unwrap();
        for (xs, d) in traj.positions.iter().zip(&traj.min_dist) {
            prop_assert!(xs.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(*d >= gaps.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-12);
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            prop_assert!((mean - mean0).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_projection_is_idempotent(
        psi in prop::collection::vec(-1.0f64..1.0, 32),
        dphi in prop::collection::vec(0.01f64..1.0, 32),
    ) {
        let once = project_out_kernel(&psi, &dphi);
        let twice = project_out_kernel(&once, &dphi);
        let dot: f64 = once.iter().zip(&dphi).map(|(a, b)| a * b).sum();
        prop_assert!(dot.abs() < 1e-12);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn config_accepts_exactly_decreasing_eps(eps in prop::collection::vec(0.05f64..0.5, 1..5)) {
        let cfg = ExperimentConfig { eps: eps.clone(), ..Default::default() };
        let decreasing = eps.windows(2).all(|w| w[1] < w[0]);
        prop_assert_eq!(cfg.validate().is_ok(), decreasing);
    }
}
