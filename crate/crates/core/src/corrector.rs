//! The corrector `psi`: the decaying solution of
//! `L psi - W''(phi) psi = phi' + eta (W''(phi) - alpha)` orthogonal to `phi'`.

use crate::error::{Error, Result};
use crate::frac_operator::{IntegralOperator, DEFAULT_RADIUS};
use crate::grid::{FarField, Grid1D};
use crate::layer::LayerProfile;
use crate::linalg::{dot, DenseMatrix};
use crate::potential::PotentialSpec;
use crate::scalar::{sup_norm, Scalar};

/// A solved corrector on its grid.
#[derive(Debug, Clone)]
pub struct CorrectorProfile<T> {
    pub grid: Grid1D<T>,
    pub psi: Vec<T>,
    pub dpsi: Vec<T>,
    /// `L psi` at the nodes.
    pub lpsi: Vec<T>,
    pub eta: T,
    /// The right-hand side `g`.
    pub rhs: Vec<T>,
    /// `sup |L psi - W''(phi) psi - g|` over the central half of the grid.
    pub residual_sup: T,
    /// `<g, phi'>` including the analytic tails.
    pub solvability_defect: T,
    /// Discrete `<psi, phi'>` after the solve.
    pub orthogonality: T,
    /// Lagrange multiplier of the orthogonality constraint; absorbs the
    /// discrete component of `g` along the near-kernel.
    pub multiplier: T,
}

impl<T: Scalar> CorrectorProfile<T> {
    /// `psi(y)`; beyond the grid the boundary value decays like `y^-2`.
    pub fn eval(&self, y: T) -> T {
        self.grid.interpolate(&self.psi, y).unwrap_or_else(|| {
            let (edge, value) = self.edge(y);
            value * (edge / y).powi(2)
        })
    }

    pub fn eval_derivative(&self, y: T) -> T {
        self.grid.interpolate(&self.dpsi, y).unwrap_or_else(|| {
            let (edge, value) = self.edge(y);
            T::lit(-2.0) * value * edge * edge / (y * y * y)
        })
    }

    /// `(L psi)(y)`; beyond the grid the corrector equation supplies it.
    pub fn eval_image(&self, y: T, lp: &LayerProfile<T>, p: &PotentialSpec<T>) -> T {
        self.grid.interpolate(&self.lpsi, y).unwrap_or_else(|| {
            let phi = lp.eval(y);
            p.w2(phi) * self.eval(y) + rhs_value(lp.eval_derivative(y), phi, p, self.eta)
        })
    }

    fn edge(&self, y: T) -> (T, T) {
        if y < self.grid.x_min() {
            (self.grid.x_min(), self.psi[0])
        } else {
            (self.grid.x_max(), self.psi[self.psi.len() - 1])
        }
    }

    /// `max(|psi(x_min)|, |psi(x_max)|)`.
    pub fn boundary_magnitude(&self) -> T {
        self.psi[0].abs().max(self.psi[self.psi.len() - 1].abs())
    }
}

/// `eta = int (phi')^2 / alpha = 1 / (gamma alpha)`.
pub fn compute_eta<T: Scalar>(lp: &LayerProfile<T>, p: &PotentialSpec<T>) -> T {
    T::one() / (lp.gamma * p.alpha())
}

fn rhs_value<T: Scalar>(dphi: T, phi: T, p: &PotentialSpec<T>, eta: T) -> T {
    dphi + eta * (p.w2(phi) - p.alpha())
}

/// `g_j = phi'_j + eta (W''(phi_j) - alpha)`.
pub fn build_rhs<T: Scalar>(lp: &LayerProfile<T>, p: &PotentialSpec<T>, eta: T) -> Vec<T> {
    lp.phi
        .iter()
        .zip(&lp.dphi)
        .map(|(phi, dphi)| rhs_value(*dphi, *phi, p, eta))
        .collect()
}

/// Integral of `f = O(y^-2)` over the half-line beyond `edge` (away from the
/// origin), via `y = X/u` and composite Simpson.
fn algebraic_tail<T: Scalar>(edge: T, f: impl Fn(T) -> T) -> T {
    const PANELS: usize = 256;
    let du = T::one() / T::from_usize_lossy(PANELS);
    // the integrand f(X/u) |X| / u^2 has a finite limit at u = 0; sample it just off the end
    let g = |u: T| {
        let u = u.max(T::lit(1e-6));
        f(edge / u) * edge.abs() / (u * u)
    };
    let mut acc = g(T::zero()) + g(T::one());
    for k in 1..PANELS {
        let w = if k % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        acc = acc + w * g(T::from_usize_lossy(k) * du);
    }
    acc * du / T::lit(3.0)
}

/// `<g, phi'>`: trapezoid on the grid plus both tails evaluated on the
/// layer's far-field model. Vanishes for the continuum layer since
/// `int phi' (W''(phi) - alpha) = -alpha` and `eta alpha gamma = 1`.
pub fn solvability_defect<T: Scalar>(lp: &LayerProfile<T>, p: &PotentialSpec<T>, g: &[T], eta: T) -> T {
    let prod: Vec<T> = g.iter().zip(&lp.dphi).map(|(a, b)| *a * *b).collect();
    let body = lp.grid.trapezoid(&prod);
    let b = T::one() / (lp.alpha * T::PI());
    let far = lp.far_field();
    let integrand = |y: T, phi: T| {
        let dphi = b / (y * y);
        rhs_value(dphi, phi, p, eta) * dphi
    };
    let right = algebraic_tail(lp.grid.x_max(), |y| integrand(y, far.right(y)));
    let left = algebraic_tail(lp.grid.x_min(), |y| integrand(y, far.left(y)));
    body + right + left
}

/// Removes the `phi'` component of `psi` in the discrete inner product.
pub fn project_out_kernel<T: Scalar>(psi: &[T], dphi: &[T]) -> Vec<T> {
    let c = dot(psi, dphi) / dot(dphi, dphi);
    psi.iter().zip(dphi).map(|(v, d)| *v - c * *d).collect()
}

#[derive(Debug, Clone)]
pub struct CorrectorOptions<T> {
    pub radius: T,
    /// Largest admissible `|<g, phi'>|`.
    pub solvability_tol: T,
    /// Smallest admissible pivot ratio of the bordered factorization.
    pub pivot_floor: T,
}

impl<T: Scalar> Default for CorrectorOptions<T> {
    fn default() -> Self {
        Self {
            radius: T::lit(DEFAULT_RADIUS),
            solvability_tol: T::lit(1e-6),
            pivot_floor: T::lit(1e-14),
        }
    }
}

/// Restricts or resamples a layer onto `grid`.
fn layer_on<T: Scalar>(lp: &LayerProfile<T>, grid: &Grid1D<T>) -> LayerProfile<T> {
    if lp.grid == *grid {
        return lp.clone();
    }
    let x = grid.nodes();
    let phi: Vec<T> = x.iter().map(|y| lp.eval(*y)).collect();
    let dphi: Vec<T> = x.iter().map(|y| lp.eval_derivative(*y)).collect();
    LayerProfile {
        grid: *grid,
        phi,
        dphi,
        lphi: Vec::new(),
        ..lp.clone()
    }
}

/// Solves the bordered system
/// `[A - diag W''(phi), phi'; h phi'^T, 0] [psi; lambda] = [g; 0]`,
/// where `A` is the truncated integral operator with zero far field.
pub fn solve_corrector<T: Scalar>(
    lp: &LayerProfile<T>,
    p: &PotentialSpec<T>,
    grid: Grid1D<T>,
    opts: &CorrectorOptions<T>,
) -> Result<CorrectorProfile<T>> {
    let layer = layer_on(lp, &grid);
    let eta = compute_eta(&layer, p);
    let g = build_rhs(&layer, p, eta);
    let defect = solvability_defect(&layer, p, &g, eta);
    if !(defect.abs() < opts.solvability_tol) {
        return Err(Error::Solvability {
            defect: defect.as_f64(),
        });
    }

    let op = IntegralOperator::new(grid, opts.radius)?;
    let a = op.matrix();
    let n = grid.len();
    let h = grid.spacing();
    let mut m = DenseMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        let row = m.row_mut(i);
        row[..n].copy_from_slice(a.row(i));
        row[i] = row[i] - p.w2(layer.phi[i]);
        row[n] = layer.dphi[i];
    }
    {
        let last = m.row_mut(n);
        for (dst, d) in last.iter_mut().zip(&layer.dphi) {
            *dst = h * *d;
        }
    }
    let lu = m.lu()?;
    let ratio = lu.pivot_ratio();
    if !(ratio >= opts.pivot_floor) {
        return Err(Error::IllConditioned { ratio: ratio.as_f64() });
    }
    let mut rhs = g.clone();
    rhs.push(T::zero());
    let mut sol = lu.solve(&rhs);
    let multiplier = sol.pop().unwrap_or_else(T::zero);
    let psi = sol;

    let lpsi = op.apply(&psi, &FarField::zero(), &op.fd_derivative(&psi, &FarField::zero()))?;
    let residual: Vec<T> = (0..n).map(|j| lpsi[j] - p.w2(layer.phi[j]) * psi[j] - g[j]).collect();
    let residual_sup = sup_norm(&residual[grid.interior()]);
    let orthogonality = h * dot(&psi, &layer.dphi);
    let dpsi = grid.derivative(&psi);
    Ok(CorrectorProfile {
        grid,
        psi,
        dpsi,
        lpsi,
        eta,
        rhs: g,
        residual_sup,
        solvability_defect: defect,
        orthogonality,
        multiplier,
    })
}

/// `sup |L_h phi' - W''(phi) phi'|` over the central half: the discrete
/// near-kernel defect of the linearized operator.
pub fn kernel_defect<T: Scalar>(lp: &LayerProfile<T>, p: &PotentialSpec<T>, radius: T) -> Result<T> {
    let op = IntegralOperator::new(lp.grid, radius)?;
    let far = FarField::zero();
    let image = op.apply_fd(&lp.dphi, &far)?;
    let r: Vec<T> = (0..lp.grid.len())
        .map(|j| image[j] - p.w2(lp.phi[j]) * lp.dphi[j])
        .collect();
    Ok(sup_norm(&r[lp.grid.interior()]))
}
