//! The ansatz residual for the PN potential with `a = 1` checked against a
//! closed form. There `L phi = W'(phi)` holds exactly and the corrector
//! vanishes, so with `y_i = (x - x_i)/eps`, `phi_i = phi(y_i)` and constant
//! stress `s`:
//!
//! `I = -sum c_i phi'(y_i) + (W'(eps (s + delta) + sum phi_i) - sum W'(phi_i) - eps s) / eps`.

use std::f64::consts::PI;

use pnlab::corrector::{solve_corrector, CorrectorOptions};
use pnlab::grid::Grid1D;
use pnlab::layer::{solve_layer, RelaxOptions};
use pnlab::particles::{integrate, IntegrateOptions, ParticleState};
use pnlab::pde::ansatz_residual;
use pnlab::potential::{make_pn_potential, StressField};

fn w1(v: f64) -> f64 {
    (2.0 * PI * v).sin() / (2.0 * PI)
}

fn closed_form(x: f64, centers: &[f64], s: f64, delta: f64, eps: f64) -> f64 {
    let gamma = 2.0 * PI;
    let mut drift = 0.0;
    let mut sum_phi = 0.0;
    let mut sum_w1 = 0.0;
    for (i, xi) in centers.iter().enumerate() {
        let pair: f64 = centers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, xj)| 1.0 / (PI * (xi - xj)))
            .sum();
        let c = gamma * (pair - (s + delta));
        let y = (x - xi) / eps;
        let phi = y.atan() / PI + 0.5;
        drift -= c / (PI * (1.0 + y * y));
        sum_phi += phi;
        sum_w1 += w1(phi);
    }
    drift + (w1(eps * (s + delta) + sum_phi) - sum_w1 - eps * s) / eps
}

fn compare(x0: &[f64], s: f64, delta: f64, eps: f64) -> f64 {
    let p = make_pn_potential(1.0).unwrap();
    let layer_grid = Grid1D::<f64>::new(-40.0, 40.0, 2048).unwrap();
    let lp = solve_layer(&p, layer_grid, &RelaxOptions::default()).unwrap();
    let cp = solve_corrector(&lp, &p, layer_grid, &CorrectorOptions::default()).unwrap();
    let stress = if s == 0.0 {
        StressField::zero()
    } else {
        StressField::constant(s)
    };
    let start: Vec<f64> = x0.iter().map(|x| x - delta).collect();
    let traj = integrate(
        &ParticleState::new(0.0, start.clone(), lp.gamma).unwrap(),
        &stress.with_offset(delta),
        0.1,
        &IntegrateOptions::default(),
    )
    .unwrap();
    let grid = Grid1D::new(-3.0, 3.0, 1201).unwrap();
    let r = ansatz_residual(&lp, Some(&cp), &p, &stress, delta, &traj, eps, 0.0, &grid).unwrap();
    r.x.iter()
        .zip(&r.field)
        .map(|(x, v)| (v - closed_form(*x, &start, s, delta, eps)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn three_layers_unshifted() {
    let err = compare(&[-1.0, 0.2, 0.9], 0.0, 0.0, 0.1);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn three_layers_shifted() {
    let err = compare(&[-1.0, 0.2, 0.9], 0.0, 0.1, 0.05);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn two_layers_under_constant_stress() {
    let err = compare(&[-0.5, 0.5], 0.3, 0.0, 0.1);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn symmetric_free_pair_is_an_exact_solution() {
    // sin(2 pi (phi_1 + phi_2)) = sin 2 pi phi_1 + sin 2 pi phi_2 reduces to the
    // drift balance for arctan layers, so the residual vanishes identically.
    let worst = (0..=600)
        .map(|k| -3.0 + k as f64 * 0.01)
        .map(|x| closed_form(x, &[-0.5, 0.5], 0.0, 0.0, 0.1).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst:e}");
}
