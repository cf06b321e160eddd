//! The limiting particle system
//! `x_i' = gamma (-sigma(t, x_i) + (1/pi) sum_{j != i} 1/(x_i - x_j))`.

use crate::error::{Error, Result};
use crate::potential::StressField;
use crate::scalar::Scalar;

/// Positions at one instant. `min_dist` is `+inf` for a single particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState<T> {
    pub t: T,
    pub x: Vec<T>,
    pub gamma: T,
    pub min_dist: T,
}

impl<T: Scalar> ParticleState<T> {
    pub fn new(t: T, x: Vec<T>, gamma: T) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidParameter("at least one particle is required".into()));
        }
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mobility must be positive, got {gamma}"
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("position {i} is not finite")));
        }
        check_order(&x)?;
        let min_dist = min_distance(&x);
        Ok(Self { t, x, gamma, min_dist })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn check_order<T: Scalar>(x: &[T]) -> Result<()> {
    for i in 1..x.len() {
        if x[i] == x[i - 1] {
            return Err(Error::SingularConfiguration { i: i - 1, j: i });
        }
        if !(x[i] > x[i - 1]) {
            return Err(Error::InvalidParameter(format!(
                "positions must be strictly increasing (index {i})"
            )));
        }
    }
    Ok(())
}

/// Smallest gap between neighbours; `+inf` for fewer than two particles.
pub fn min_distance<T: Scalar>(x: &[T]) -> T {
    x.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min)
}

fn velocities<T: Scalar>(t: T, x: &[T], gamma: T, stress: &StressField<T>) -> Vec<T> {
    let inv_pi = T::FRAC_1_PI();
    (0..x.len())
        .map(|i| {
            let interaction = x
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(T::zero(), |acc, (_, xj)| acc + T::one() / (x[i] - *xj));
            gamma * (-stress.value(t, x[i]) + inv_pi * interaction)
        })
        .collect()
}

/// Particle velocities.
pub fn rhs<T: Scalar>(state: &ParticleState<T>, stress: &StressField<T>) -> Result<Vec<T>> {
    check_order(&state.x)?;
    Ok(velocities(state.t, &state.x, state.gamma, stress))
}

/// Time derivative of the velocities along the flow.
pub fn accelerations<T: Scalar>(state: &ParticleState<T>, stress: &StressField<T>) -> Result<Vec<T>> {
    let v = rhs(state, stress)?;
    let x = &state.x;
    let t = state.t;
    let inv_pi = T::FRAC_1_PI();
    Ok((0..x.len())
        .map(|i| {
            let pair = (0..x.len()).filter(|j| *j != i).fold(T::zero(), |acc, j| {
                let d = x[i] - x[j];
                acc + (v[i] - v[j]) / (d * d)
            });
            state.gamma * (-stress.dt(t, x[i]) - stress.dx(t, x[i]) * v[i] - inv_pi * pair)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions<T> {
    /// Upper bound on the internal step.
    pub dt_max: T,
    /// `dt <= safety * min_dist^2 / gamma`.
    pub safety: T,
    /// Requested output times; empty means 101 evenly spaced samples.
    pub output_times: Vec<T>,
    /// Length scale for the hard distance floor `1e-8 * scale`; `None` uses
    /// the initial spread (at least 1).
    pub scale: Option<T>,
}

impl<T: Scalar> Default for IntegrateOptions<T> {
    fn default() -> Self {
        Self {
            dt_max: T::lit(1e-2),
            safety: T::lit(0.05),
            output_times: Vec::new(),
            scale: None,
        }
    }
}

/// Sampled solution of the particle system.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub gamma: T,
    pub times: Vec<T>,
    pub positions: Vec<Vec<T>>,
    pub velocities: Vec<Vec<T>>,
    pub min_dist: Vec<T>,
    pub steps: usize,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> ParticleState<T> {
        let k = self.times.len() - 1;
        ParticleState {
            t: self.times[k],
            x: self.positions[k].clone(),
            gamma: self.gamma,
            min_dist: self.min_dist[k],
        }
    }

    /// State at time `t` by cubic Hermite interpolation between samples.
    pub fn state_at(&self, t: T) -> Option<ParticleState<T>> {
        let first = *self.times.first()?;
        let last = *self.times.last()?;
        if t < first || t > last {
            return None;
        }
        let k = self
            .times
            .partition_point(|s| *s <= t)
            .clamp(1, self.times.len().max(2) - 1);
        if self.times.len() == 1 {
            return Some(self.final_state());
        }
        let x = hermite(
            self.times[k - 1],
            self.times[k],
            &self.positions[k - 1],
            &self.positions[k],
            &self.velocities[k - 1],
            &self.velocities[k],
            t,
        );
        let min_dist = min_distance(&x);
        Some(ParticleState {
            t,
            x,
            gamma: self.gamma,
            min_dist,
        })
    }
}

fn hermite<T: Scalar>(t0: T, t1: T, x0: &[T], x1: &[T], v0: &[T], v1: &[T], t: T) -> Vec<T> {
    let dt = t1 - t0;
    if dt == T::zero() {
        return x1.to_vec();
    }
    let s = (t - t0) / dt;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let h00 = two * s * s * s - three * s * s + T::one();
    let h10 = s * s * s - two * s * s + s;
    let h01 = -two * s * s * s + three * s * s;
    let h11 = s * s * s - s * s;
    (0..x0.len())
        .map(|i| h00 * x0[i] + h10 * dt * v0[i] + h01 * x1[i] + h11 * dt * v1[i])
        .collect()
}

fn rk4_step<T: Scalar>(t: T, x: &[T], dt: T, gamma: T, stress: &StressField<T>, k1: &[T]) -> Vec<T> {
    let half = dt / T::lit(2.0);
    let at = |c: T, k: &[T]| -> Vec<T> { x.iter().zip(k).map(|(a, b)| *a + c * *b).collect() };
    let k2 = velocities(t + half, &at(half, k1), gamma, stress);
    let k3 = velocities(t + half, &at(half, &k2), gamma, stress);
    let k4 = velocities(t + dt, &at(dt, &k3), gamma, stress);
    let sixth = dt / T::lit(6.0);
    (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect()
}

/// Classical fourth-order Runge–Kutta with the step tied to the closest pair.
pub fn integrate<T: Scalar>(
    state0: &ParticleState<T>,
    stress: &StressField<T>,
    t_end: T,
    opts: &IntegrateOptions<T>,
) -> Result<Trajectory<T>> {
    if !(t_end > state0.t) {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} must exceed the initial time {}",
            state0.t
        )));
    }
    if !(opts.dt_max > T::zero()) || !(opts.safety > T::zero()) {
        return Err(Error::InvalidParameter("step controls must be positive".into()));
    }
    check_order(&state0.x)?;
    let outputs: Vec<T> = if opts.output_times.is_empty() {
        (0..=100)
            .map(|k| state0.t + (t_end - state0.t) * T::from_usize_lossy(k) / T::lit(100.0))
            .collect()
    } else {
        let mut v = opts.output_times.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if v.iter().any(|s| *s < state0.t || *s > t_end) {
            return Err(Error::InvalidParameter("output times must lie in [t0, t_end]".into()));
        }
        v
    };
    let n = state0.x.len();
    let spread = state0.x[n - 1] - state0.x[0];
    let scale = opts.scale.unwrap_or(spread.max(T::one()));
    let floor = T::lit(1e-8) * scale;
    let gamma = state0.gamma;

    let mut traj = Trajectory {
        gamma,
        times: Vec::with_capacity(outputs.len()),
        positions: Vec::with_capacity(outputs.len()),
        velocities: Vec::with_capacity(outputs.len()),
        min_dist: Vec::with_capacity(outputs.len()),
        steps: 0,
    };
    let mut t = state0.t;
    let mut x = state0.x.clone();
    let mut v = velocities(t, &x, gamma, stress);
    let mut next_out = 0;
    let record = |traj: &mut Trajectory<T>, ts: T, xs: Vec<T>, vs: Vec<T>| {
        traj.min_dist.push(min_distance(&xs));
        traj.times.push(ts);
        traj.positions.push(xs);
        traj.velocities.push(vs);
    };
    while next_out < outputs.len() && outputs[next_out] <= t {
        record(&mut traj, t, x.clone(), v.clone());
        next_out += 1;
    }
    while t < t_end {
        let d = min_distance(&x);
        let mut dt = opts.dt_max.min(t_end - t);
        if d.is_finite() {
            dt = dt.min(opts.safety * d * d / gamma);
            // also keep neighbours from closing more than a fraction of their gap
            let closing = (1..n)
                .map(|i| (v[i - 1] - v[i]) / (x[i] - x[i - 1]))
                .fold(T::zero(), T::max);
            if closing > T::zero() {
                dt = dt.min(opts.safety / closing);
            }
        }
        let x_new = rk4_step(t, &x, dt, gamma, stress, &v);
        let t_new = if t_end - (t + dt) <= T::epsilon() * t_end.abs().max(T::one()) {
            t_end
        } else {
            t + dt
        };
        check_order(&x_new)?;
        let d_new = min_distance(&x_new);
        if d_new < floor {
            return Err(Error::DistanceFloor {
                distance: d_new.as_f64(),
                floor: floor.as_f64(),
                t: t_new.as_f64(),
            });
        }
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                steps: traj.steps,
                residual: f64::INFINITY,
            });
        }
        let v_new = velocities(t_new, &x_new, gamma, stress);
        while next_out < outputs.len() && outputs[next_out] <= t_new {
            let ts = outputs[next_out];
            let xs = if ts == t_new {
                x_new.clone()
            } else {
                hermite(t, t_new, &x, &x_new, &v, &v_new, ts)
            };
            let vs = velocities(ts, &xs, gamma, stress);
            record(&mut traj, ts, xs, vs);
            next_out += 1;
        }
        t = t_new;
        x = x_new;
        v = v_new;
        traj.steps += 1;
    }
    Ok(traj)
}

/// Outcome of the exponential minimal-distance check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RepulsionReport {
    pub holds: bool,
    /// `min_t d(t) / (d(0) e^{-gamma K t})`; `+inf` when vacuous.
    pub worst_ratio: f64,
    pub violations: usize,
    pub vacuous: bool,
}

/// Checks `d(t) >= d(0) exp(-gamma K t) (1 - 1e-6)` at every sample.
pub fn check_repulsion_bound<T: Scalar>(traj: &Trajectory<T>, k: T, gamma: T) -> RepulsionReport {
    let slack = T::lit(1e-6);
    let d0 = traj.min_dist.first().copied().unwrap_or(T::infinity());
    if !d0.is_finite() {
        return RepulsionReport {
            holds: true,
            worst_ratio: f64::INFINITY,
            violations: 0,
            vacuous: true,
        };
    }
    let t0 = traj.times[0];
    let mut worst = T::infinity();
    let mut violations = 0;
    for (t, d) in traj.times.iter().zip(&traj.min_dist) {
        let bound = d0 * (-gamma * k * (*t - t0)).exp();
        worst = worst.min(*d / bound);
        if *d < bound * (T::one() - slack) {
            violations += 1;
        }
    }
    RepulsionReport {
        holds: violations == 0,
        worst_ratio: worst.as_f64(),
        violations,
        vacuous: false,
    }
}

/// The bound curve `d(0) e^{-gamma K t}` at the trajectory's sample times.
pub fn repulsion_bound_curve<T: Scalar>(traj: &Trajectory<T>, k: T, gamma: T) -> Vec<T> {
    let d0 = traj.min_dist.first().copied().unwrap_or(T::infinity());
    let t0 = traj.times.first().copied().unwrap_or(T::zero());
    traj.times.iter().map(|t| d0 * (-gamma * k * (*t - t0)).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pair(gamma: f64) -> ParticleState<f64> {
        ParticleState::new(0.0, vec![-0.5, 0.5], gamma).unwrap()
    }

    #[test]
    fn velocity_examples() {
        let zero = StressField::zero();
        let single = ParticleState::new(0.0, vec![0.3_f64], 2.0).unwrap();
        assert_eq!(rhs(&single, &zero).unwrap(), vec![0.0]);
        assert!(single.min_dist.is_infinite());
        let v = rhs(&pair(2.0 * PI), &zero).unwrap();
        assert!((v[0] + 2.0).abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14);
        let v = rhs(&single, &StressField::constant(0.25)).unwrap();
        assert!((v[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_configurations() {
        assert!(matches!(
            ParticleState::new(0.0, vec![0.0, 0.0], 1.0),
            Err(Error::SingularConfiguration { i: 0, j: 1 })
        ));
        assert!(ParticleState::new(0.0, vec![1.0, 0.0], 1.0).is_err());
        assert!(ParticleState::new(0.0, vec![0.0], 0.0).is_err());
        assert!(ParticleState::<f64>::new(0.0, vec![], 1.0).is_err());
        let s = pair(1.0);
        assert!(integrate(&s, &StressField::zero(), 0.0, &IntegrateOptions::default()).is_err());
    }

    #[test]
    fn symmetric_pair_closed_form() {
        // d' = 2 gamma / (pi d): d(t) = sqrt(d0^2 + 4 gamma t / pi)
        let traj = integrate(&pair(2.0 * PI), &StressField::zero(), 1.0, &IntegrateOptions::default()).unwrap();
        let last = traj.final_state();
        assert!((last.t - 1.0).abs() < 1e-15);
        assert!((last.min_dist - 3.0).abs() / 3.0 < 1e-6);
        assert!((last.x[0] + 1.5).abs() < 1e-6 && (last.x[1] - 1.5).abs() < 1e-6);
        for (t, d) in traj.times.iter().zip(&traj.min_dist) {
            assert!((d - (1.0 + 8.0 * t).sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn fourth_order_under_step_halving() {
        let err = |dt: f64| {
            let opts = IntegrateOptions {
                dt_max: dt,
                safety: 1e3,
                ..Default::default()
            };
            let traj = integrate(&pair(2.0 * PI), &StressField::zero(), 1.0, &opts).unwrap();
            (traj.final_state().min_dist - 3.0).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn constant_stress_translates_single_particle_exactly() {
        let s = ParticleState::new(0.0, vec![0.2_f64], 3.0).unwrap();
        let traj = integrate(&s, &StressField::constant(0.5), 2.0, &IntegrateOptions::default()).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.positions) {
            assert!((x[0] - (0.2 - 1.5 * t)).abs() < 1e-13);
        }
    }

    #[test]
    fn middle_of_three_stays_put_and_mass_is_conserved() {
        let s = ParticleState::new(0.0, vec![-1.0, 0.0, 1.0], 2.0 * PI).unwrap();
        let traj = integrate(&s, &StressField::zero(), 1.0, &IntegrateOptions::default()).unwrap();
        for x in &traj.positions {
            assert!(x[1].abs() < 1e-12);
            assert!(x.iter().sum::<f64>().abs() < 1e-12);
        }
        let s = ParticleState::new(0.0, vec![-1.0, 0.1, 0.7, 2.0], 3.0).unwrap();
        let traj = integrate(&s, &StressField::zero(), 1.0, &IntegrateOptions::default()).unwrap();
        let m0: f64 = traj.positions[0].iter().sum();
        for x in &traj.positions {
            assert!((x.iter().sum::<f64>() - m0).abs() < 1e-10);
        }
    }

    #[test]
    fn repulsion_bound_on_lipschitz_stress() {
        let sigma = StressField::affine(0.0, 0.1, 10.0).unwrap();
        let gamma = 2.0 * PI;
        let traj = integrate(&pair(gamma), &sigma, 2.0, &IntegrateOptions::default()).unwrap();
        let rep = check_repulsion_bound(&traj, sigma.lipschitz_k(), gamma);
        assert!(rep.holds && !rep.vacuous, "{rep:?}");
        let zero = integrate(&pair(gamma), &StressField::zero(), 2.0, &IntegrateOptions::default()).unwrap();
        let rep = check_repulsion_bound(&zero, 0.0, gamma);
        assert!(rep.holds && rep.worst_ratio >= 1.0);
        let single = ParticleState::new(0.0, vec![0.0], gamma).unwrap();
        let one = integrate(&single, &sigma, 1.0, &IntegrateOptions::default()).unwrap();
        assert!(check_repulsion_bound(&one, 0.1, gamma).vacuous);
    }

    #[test]
    fn non_lipschitz_squeeze_hits_the_distance_floor() {
        // a stress jump of 2e9 at the origin balances the repulsion only at
        // d = 1/(pi 1e9), well below the floor
        let sigma = StressField::custom(std::sync::Arc::new(|_, x: f64| 1e9 * x / (x.abs() + 1e-14)), 0.0);
        let s = ParticleState::new(0.0, vec![-0.5, 0.5], 1.0).unwrap();
        match integrate(&s, &sigma, 1.0, &IntegrateOptions::default()) {
            Err(Error::DistanceFloor { distance, floor, .. }) => {
                assert!(distance < floor);
                assert!((floor - 1e-8).abs() < 1e-20);
            }
            other => panic!("expected the distance floor, got {other:?}"),
        }
    }

    #[test]
    fn dense_output_and_accelerations() {
        let gamma = 2.0 * PI;
        let traj = integrate(&pair(gamma), &StressField::zero(), 1.0, &IntegrateOptions::default()).unwrap();
        let mid = traj.state_at(0.505).unwrap();
        let d = (1.0 + 8.0 * 0.505f64).sqrt();
        assert!((mid.min_dist - d).abs() < 1e-6);
        // d'' = -(2 gamma/pi)^2 / d^3 and x_2 = d/2
        let acc = accelerations(&mid, &StressField::zero()).unwrap();
        assert!((acc[1] - (-0.5 * 16.0 / d.powi(3))).abs() < 1e-5);
        assert!(traj.state_at(1.5).is_none());
    }
}
