//! The rescaled evolution `v_t = (1/eps) (L v - W'(v)/eps + sigma)` on a
//! truncated line, prepared initial data, layer tracking, and the ansatz
//! residual diagnostic.

use crate::corrector::CorrectorProfile;
use crate::error::{Error, Result};
use crate::frac_operator::{IntegralOperator, DEFAULT_RADIUS};
use crate::grid::{FarField, Grid1D};
use crate::layer::{level_crossing, LayerProfile};
use crate::linalg::{DenseMatrix, LuFactor};
use crate::particles::{accelerations, rhs, Trajectory};
use crate::potential::{PotentialSpec, StressField};
use crate::scalar::Scalar;

/// Allowed overshoot of `v` below `0` and above `N`.
pub const RANGE_MARGIN: f64 = 0.25;

/// A sampled field and its two constant far-field states.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    pub grid: Grid1D<T>,
    pub v: Vec<T>,
    pub t: T,
    pub eps: T,
    pub far: FarField<T>,
    pub layers: usize,
}

impl<T: Scalar> FieldState<T> {
    /// Checks `-1/4 <= v <= N + 1/4` at every node.
    pub fn check_range(&self) -> Result<()> {
        let lo = -T::lit(RANGE_MARGIN);
        let hi = T::from_usize_lossy(self.layers) + T::lit(RANGE_MARGIN);
        for (node, value) in self.v.iter().enumerate() {
            if !(*value >= lo && *value <= hi) {
                return Err(Error::RangeViolation {
                    lo: lo.as_f64(),
                    hi: hi.as_f64(),
                    value: value.as_f64(),
                    node,
                    t: self.t.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Time step used when none is given: `0.1 eps^2 / sup|W''|`.
pub fn default_dt<T: Scalar>(p: &PotentialSpec<T>, eps: T) -> T {
    T::lit(0.1) * eps * eps / p.w2_sup()
}

fn check_resolution<T: Scalar>(grid: &Grid1D<T>, eps: T) -> Result<()> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let limit = eps / T::lit(8.0);
    if grid.spacing() > limit * (T::one() + T::lit(1e-9)) {
        return Err(Error::Precondition(format!(
            "grid spacing {} does not resolve eps = {eps} (need h <= eps/8 = {limit})",
            grid.spacing()
        )));
    }
    Ok(())
}

fn far_for<T: Scalar>(
    grid: &Grid1D<T>,
    alpha: T,
    eps: T,
    layers: usize,
    center: T,
    c_left: T,
    c_right: T,
) -> FarField<T> {
    let b = T::from_usize_lossy(layers) * eps / (alpha * T::PI());
    let center = center.max(grid.x_min()).min(grid.x_max());
    FarField::constant(c_left, c_right).with_tails(b, b).with_center(center)
}

/// `v_0(x) = (eps/alpha) sigma(0, x) + sum_i phi((x - x_i)/eps)`.
pub fn build_initial<T: Scalar>(
    lp: &LayerProfile<T>,
    p: &PotentialSpec<T>,
    stress: &StressField<T>,
    x0: &[T],
    eps: T,
    grid: Grid1D<T>,
) -> Result<FieldState<T>> {
    check_resolution(&grid, eps)?;
    if x0.is_empty() {
        return Err(Error::InvalidParameter("at least one particle is required".into()));
    }
    for i in 1..x0.len() {
        if !(x0[i] > x0[i - 1]) {
            return Err(Error::SingularConfiguration { i: i - 1, j: i });
        }
    }
    let margin = T::lit(5.0) * eps;
    if x0[0] < grid.x_min() + margin || x0[x0.len() - 1] > grid.x_max() - margin {
        return Err(Error::Precondition(format!(
            "particles must lie at least 5 eps = {margin} inside the grid"
        )));
    }
    let alpha = p.alpha();
    let scale = eps / alpha;
    let v = grid
        .nodes()
        .into_iter()
        .map(|x| {
            x0.iter().fold(scale * stress.value(T::zero(), x), |acc, xi| {
                acc + lp.eval((x - *xi) / eps)
            })
        })
        .collect();
    let n = x0.len();
    let center = x0.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let far = far_for(
        &grid,
        alpha,
        eps,
        n,
        center,
        scale * stress.value(T::zero(), grid.x_min()),
        T::from_usize_lossy(n) + scale * stress.value(T::zero(), grid.x_max()),
    );
    Ok(FieldState {
        grid,
        v,
        t: T::zero(),
        eps,
        far,
        layers: n,
    })
}

/// Crossings of the levels `i - 1/2` after removing `(eps/alpha) sigma`.
pub fn track_layers<T: Scalar>(
    state: &FieldState<T>,
    p: &PotentialSpec<T>,
    stress: &StressField<T>,
    n: usize,
) -> Result<Vec<T>> {
    let scale = state.eps / p.alpha();
    let w: Vec<T> = state
        .grid
        .nodes()
        .into_iter()
        .zip(&state.v)
        .map(|(x, v)| *v - scale * stress.value(state.t, x))
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let level = T::from_usize_lossy(i) - T::lit(0.5);
        match level_crossing(&state.grid, &w, level) {
            Some(x) => out.push(x),
            None => {
                return Err(Error::TrackingLost {
                    found: i - 1,
                    expected: n,
                })
            }
        }
    }
    Ok(out)
}

/// Settings for [`Evolver`].
#[derive(Debug, Clone)]
pub struct EvolveOptions<T> {
    /// Time step; `None` uses [`default_dt`].
    pub dt: Option<T>,
    /// Compensation radius in layer units; the operator uses `eps * radius`.
    pub radius: T,
    /// Move the far-field tail center to the mean tracked position each step.
    pub follow_center: bool,
}

impl<T: Scalar> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            dt: None,
            radius: T::lit(DEFAULT_RADIUS),
            follow_center: true,
        }
    }
}

/// IMEX stepper: implicit in `L`, explicit in the reaction and the stress.
/// The factorization of `I - (dt/eps) A` is computed once.
pub struct Evolver<T: Scalar> {
    grid: Grid1D<T>,
    eps: T,
    dt: T,
    op: IntegralOperator<T>,
    lu: LuFactor<T>,
    follow_center: bool,
}

impl<T: Scalar> std::fmt::Debug for Evolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evolver")
            .field("grid", &self.grid)
            .field("eps", &self.eps)
            .field("dt", &self.dt)
            .finish()
    }
}

impl<T: Scalar> Evolver<T> {
    pub fn new(grid: Grid1D<T>, p: &PotentialSpec<T>, eps: T, opts: &EvolveOptions<T>) -> Result<Self> {
        check_resolution(&grid, eps)?;
        let dt = opts.dt.unwrap_or_else(|| default_dt(p, eps));
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let op = IntegralOperator::new(grid, eps * opts.radius)?;
        let a = op.matrix();
        let n = grid.len();
        let mut m = DenseMatrix::zeros(n, n);
        let k = dt / eps;
        for i in 0..n {
            let dst = m.row_mut(i);
            for (d, v) in dst.iter_mut().zip(a.row(i)) {
                *d = -k * *v;
            }
            dst[i] = dst[i] + T::one();
        }
        let lu = m.lu()?;
        Ok(Self {
            grid,
            eps,
            dt,
            op,
            lu,
            follow_center: opts.follow_center,
        })
    }

    /// Stepper whose step divides `interval` exactly and does not exceed the default.
    pub fn with_interval(
        grid: Grid1D<T>,
        p: &PotentialSpec<T>,
        eps: T,
        interval: T,
        opts: &EvolveOptions<T>,
    ) -> Result<Self> {
        let target = opts.dt.unwrap_or_else(|| default_dt(p, eps));
        let steps = (interval / target).ceil().max(T::one());
        let opts = EvolveOptions {
            dt: Some(interval / steps),
            ..opts.clone()
        };
        Self::new(grid, p, eps, &opts)
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    /// `L_h v` for a state on this stepper's grid.
    pub fn image(&self, state: &FieldState<T>) -> Result<Vec<T>> {
        self.op.apply_fd(&state.v, &state.far)
    }

    /// One step:
    /// `(I - (dt/eps) A) v_new = v + (dt/eps) (s(far) - W'(v)/eps + sigma(t, x))`,
    /// with each far-field constant advanced by explicit Euler on
    /// `c_t = (1/eps) (-W'(c)/eps + sigma)`.
    pub fn step(&self, state: &FieldState<T>, p: &PotentialSpec<T>, stress: &StressField<T>) -> Result<FieldState<T>> {
        if state.grid != self.grid || state.eps != self.eps {
            return Err(Error::InvalidParameter(
                "state does not match the stepper's grid or eps".into(),
            ));
        }
        let eps = self.eps;
        let k = self.dt / eps;
        let t = state.t;
        let s = self.op.source(&state.far)?;
        let rhs: Vec<T> = self
            .grid
            .nodes()
            .into_iter()
            .zip(state.v.iter().zip(&s))
            .map(|(x, (v, si))| *v + k * (*si - p.w1(*v) / eps + stress.value(t, x)))
            .collect();
        let v = self.lu.solve(&rhs);
        let advance = |c: T, x: T| c + k * (-p.w1(c) / eps + stress.value(t, x));
        let mut far = state.far;
        far.c_left = advance(far.c_left, self.grid.x_min());
        far.c_right = advance(far.c_right, self.grid.x_max());
        let mut next = FieldState {
            grid: self.grid,
            v,
            t: t + self.dt,
            eps,
            far,
            layers: state.layers,
        };
        if next.v.iter().any(|v| !v.is_finite()) || !next.far.is_finite() {
            return Err(Error::Divergence {
                steps: 1,
                residual: f64::INFINITY,
            });
        }
        next.check_range()?;
        if self.follow_center {
            if let Ok(x) = track_layers(&next, p, stress, next.layers) {
                let mean = x.iter().copied().sum::<T>() / T::from_usize_lossy(x.len());
                next.far.center = mean.max(self.grid.x_min()).min(self.grid.x_max());
            }
        }
        Ok(next)
    }

    /// Steps until `t_end`, calling `observe` after every step.
    pub fn run(
        &self,
        state: &FieldState<T>,
        p: &PotentialSpec<T>,
        stress: &StressField<T>,
        t_end: T,
        mut observe: impl FnMut(&FieldState<T>) -> Result<()>,
    ) -> Result<FieldState<T>> {
        let mut current = state.clone();
        let slack = self.dt * T::lit(1e-6);
        while current.t + slack < t_end {
            current = self.step(&current, p, stress)?;
            observe(&current)?;
        }
        Ok(current)
    }
}

/// One step with a freshly factored operator; `dt = 0` returns the state unchanged.
/// Repeated stepping should go through an [`Evolver`].
pub fn step<T: Scalar>(
    state: &FieldState<T>,
    p: &PotentialSpec<T>,
    stress: &StressField<T>,
    dt: T,
) -> Result<FieldState<T>> {
    if dt == T::zero() {
        return Ok(state.clone());
    }
    let ev = Evolver::new(
        state.grid,
        p,
        state.eps,
        &EvolveOptions {
            dt: Some(dt),
            ..Default::default()
        },
    )?;
    ev.step(state, p, stress)
}

/// Pointwise ansatz residual and its extremes.
#[derive(Debug, Clone)]
pub struct AnsatzResidual<T> {
    pub x: Vec<T>,
    pub field: Vec<T>,
    pub sup: T,
    pub min: T,
}

/// Residual `I = eps v_t + (1/eps) (W'(v) - eps L v - eps sigma)` of the ansatz
/// `v = eps sigma~ + sum_i [phi((x - x_i)/eps) - eps c_i psi((x - x_i)/eps)]`,
/// with `sigma~ = (sigma + delta)/alpha` and `c_i` the velocities of the
/// particle system driven by `sigma + delta`. The trajectory must come from
/// that same shifted system.
#[allow(clippy::too_many_arguments)]
pub fn ansatz_residual<T: Scalar>(
    lp: &LayerProfile<T>,
    cp: Option<&CorrectorProfile<T>>,
    p: &PotentialSpec<T>,
    stress: &StressField<T>,
    delta: T,
    traj: &Trajectory<T>,
    eps: T,
    t: T,
    grid: &Grid1D<T>,
) -> Result<AnsatzResidual<T>> {
    let cp = cp.ok_or_else(|| Error::Precondition("the ansatz residual needs a corrector profile".into()))?;
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let state = traj
        .state_at(t)
        .ok_or_else(|| Error::InvalidParameter(format!("t = {t} lies outside the trajectory")))?;
    let shifted = stress.with_offset(delta);
    let c = rhs(&state, &shifted)?;
    let dc = accelerations(&state, &shifted)?;
    let alpha = p.alpha();
    let nodes = grid.nodes();
    let sig_tilde: Vec<T> = nodes.iter().map(|x| shifted.value(t, *x) / alpha).collect();
    let l_sig_tilde = if shifted.is_uniform() {
        vec![T::zero(); nodes.len()]
    } else {
        let far = FarField::constant(sig_tilde[0], sig_tilde[nodes.len() - 1]);
        let op = IntegralOperator::new(*grid, (eps * T::lit(DEFAULT_RADIUS)).max(T::lit(2.0) * grid.spacing()))?;
        op.apply_fd(&sig_tilde, &far)?
    };
    let mut field = Vec::with_capacity(nodes.len());
    for (j, x) in nodes.iter().enumerate() {
        let mut v = eps * sig_tilde[j];
        let mut vt = eps * shifted.dt(t, *x) / alpha;
        let mut lv = eps * l_sig_tilde[j];
        for (i, xi) in state.x.iter().enumerate() {
            let y = (*x - *xi) / eps;
            let phi = lp.eval(y);
            let psi = cp.eval(y);
            let lphi = lp.eval_image(y).unwrap_or_else(|| p.w1(phi));
            v = v + phi - eps * c[i] * psi;
            vt = vt - c[i] / eps * lp.eval_derivative(y) + c[i] * c[i] * cp.eval_derivative(y) - eps * dc[i] * psi;
            lv = lv + lphi / eps - c[i] * cp.eval_image(y, lp, p);
        }
        let sigma = stress.value(t, *x);
        field.push(eps * vt + (p.w1(v) - eps * lv - eps * sigma) / eps);
    }
    let sup = field.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let min = field.iter().fold(T::infinity(), |m, v| m.min(*v));
    Ok(AnsatzResidual {
        x: nodes,
        field,
        sup,
        min,
    })
}
