//! The half-Laplacian `L = -(-d^2/dx^2)^{1/2}` on sampled functions.
//!
//! Two independent discretizations are provided:
//!
//! * [`apply_spectral`]: the Fourier multiplier `-|xi|` on one period of a
//!   periodic sample;
//! * [`IntegralOperator`]: the singular integral
//!   `(1/pi) PV int (w(x+z) - w(x) - z w'(x) 1{|z|<=r}) / z^2 dz`
//!   with cell-midpoint quadrature on the grid and closed-form integrals of
//!   the [`FarField`] model beyond it.
//!
//! The integral form is also available as an affine dense operator
//! `L_h w = A w + s(far)` for implicit time stepping and linear solves.

use num_traits::Float;
use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{FarField, Grid1D};
use crate::linalg::DenseMatrix;
use crate::scalar::{sup_diff, Scalar};

/// Default compensation radius.
pub const DEFAULT_RADIUS: f64 = 1.0;

/// Applies the multiplier `-|xi_k|`, `xi_k = 2 pi k / Lambda`, to one period of
/// samples, `Lambda = x_max - x_min + h`.
pub fn apply_spectral<T: Scalar + FftNum>(grid: &Grid1D<T>, values: &[T]) -> Result<Vec<T>> {
    grid.check_len(values.len())?;
    let n = values.len();
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<T>> = values.iter().map(|v| Complex::new(*v, T::zero())).collect();
    forward.process(&mut buf);
    let base = T::lit(2.0) * T::PI() / grid.period_length();
    let scale = T::one() / T::from_usize_lossy(n);
    for (k, c) in buf.iter_mut().enumerate() {
        let xi = base * T::from_usize_lossy(k.min(n - k));
        *c = *c * (-xi * scale);
    }
    inverse.process(&mut buf);
    Ok(buf.into_iter().map(|c| c.re).collect())
}

/// `int_X^inf dy / (y (y - x)^2)` for `X > 0`, `X > x`.
fn tail_kernel<T: Scalar>(x: T, cut: T) -> T {
    let u = x / cut;
    if u.abs() < T::lit(0.25) {
        // (1/X^2) sum_k u^k (k+1)/(k+2)
        let mut sum = T::zero();
        let mut pow = T::one();
        for k in 0..60 {
            let kf = T::from_usize_lossy(k);
            sum = sum + pow * (kf + T::one()) / (kf + T::lit(2.0));
            pow = pow * u;
            if pow.abs() < T::epsilon() * T::lit(1e-3) {
                break;
            }
        }
        sum / (cut * cut)
    } else {
        T::one() / (x * (cut - x)) + Float::ln_1p(-u) / (x * x)
    }
}

/// Dense-capable discretization of the singular integral on a fixed grid.
#[derive(Debug, Clone)]
pub struct IntegralOperator<T> {
    grid: Grid1D<T>,
    near_cells: usize,
    radius: T,
    /// `1/(m^2 h)` for `m >= 1`, index 0 unused.
    kernel: Vec<T>,
    kernel_row_sum: Vec<T>,
    inv_z_left: Vec<T>,
    inv_z_right: Vec<T>,
    /// Coefficient of `w'(x_i)` left over by the compensation term, divided by pi.
    compensation: Vec<T>,
}

impl<T: Scalar> IntegralOperator<T> {
    /// `radius` is rounded to the nearest cell boundary `(M + 1/2) h`.
    pub fn new(grid: Grid1D<T>, radius: T) -> Result<Self> {
        let n = grid.len();
        let h = grid.spacing();
        if !(radius > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "compensation radius must be positive, got {radius}"
            )));
        }
        let m = (radius / h - T::lit(0.5)).round().max(T::zero());
        let near_cells = m.to_usize().unwrap_or(usize::MAX);
        if near_cells >= n / 2 {
            return Err(Error::GridTooSmall(format!(
                "compensation radius {radius} spans {near_cells} cells on a grid of {n} nodes"
            )));
        }
        let radius = (T::from_usize_lossy(near_cells) + T::lit(0.5)) * h;

        let kernel: Vec<T> = (0..n)
            .map(|m| {
                if m == 0 {
                    T::zero()
                } else {
                    let mf = T::from_usize_lossy(m);
                    T::one() / (mf * mf * h)
                }
            })
            .collect();
        let mut prefix = vec![T::zero(); n];
        for m in 1..n {
            prefix[m] = prefix[m - 1] + kernel[m];
        }
        let kernel_row_sum: Vec<T> = (0..n).map(|i| prefix[i] + prefix[n - 1 - i]).collect();

        let mut harmonic = vec![T::zero(); near_cells + 1];
        for m in 1..=near_cells {
            harmonic[m] = harmonic[m - 1] + T::one() / T::from_usize_lossy(m);
        }
        let half = T::lit(0.5) * h;
        let mut inv_z_left = Vec::with_capacity(n);
        let mut inv_z_right = Vec::with_capacity(n);
        let mut compensation = Vec::with_capacity(n);
        for i in 0..n {
            let z_left = T::from_usize_lossy(i) * h + half;
            let z_right = T::from_usize_lossy(n - 1 - i) * h + half;
            inv_z_left.push(T::one() / z_left);
            inv_z_right.push(T::one() / z_right);
            let mut c = -(harmonic[near_cells.min(n - 1 - i)] - harmonic[near_cells.min(i)]);
            if z_right < radius {
                c = c - (radius / z_right).ln();
            }
            if z_left < radius {
                c = c + (radius / z_left).ln();
            }
            compensation.push(c / T::PI());
        }

        Ok(Self {
            grid,
            near_cells,
            radius,
            kernel,
            kernel_row_sum,
            inv_z_left,
            inv_z_right,
            compensation,
        })
    }

    pub fn with_default_radius(grid: Grid1D<T>) -> Result<Self> {
        Self::new(grid, T::lit(DEFAULT_RADIUS))
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    /// Effective compensation radius `(M + 1/2) h`.
    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn near_cells(&self) -> usize {
        self.near_cells
    }

    fn check_far(&self, far: &FarField<T>) -> Result<()> {
        if !far.is_finite() {
            return Err(Error::InvalidParameter("far field must be finite".into()));
        }
        let half = T::lit(0.5) * self.grid.spacing();
        let has_tails = far.b_left != T::zero() || far.b_right != T::zero();
        if has_tails && !(far.center > self.grid.x_min() - half && far.center < self.grid.x_max() + half) {
            return Err(Error::InvalidParameter(format!(
                "far-field tail center {} lies outside the grid",
                far.center
            )));
        }
        Ok(())
    }

    fn ghosts(&self, far: &FarField<T>) -> (T, T) {
        let h = self.grid.spacing();
        (far.left(self.grid.x_min() - h), far.right(self.grid.x_max() + h))
    }

    /// Far-field contribution at node `i` that does not involve the samples.
    fn tail_source(&self, far: &FarField<T>, i: usize) -> T {
        let half = T::lit(0.5) * self.grid.spacing();
        let mut s = far.c_right * self.inv_z_right[i] + far.c_left * self.inv_z_left[i];
        let x = self.grid.node(i) - far.center;
        if far.b_right != T::zero() {
            let cut = self.grid.x_max() + half - far.center;
            s = s - far.b_right * tail_kernel(x, cut);
        }
        if far.b_left != T::zero() {
            let cut = far.center - (self.grid.x_min() - half);
            s = s + far.b_left * tail_kernel(-x, cut);
        }
        s / T::PI()
    }

    /// Centered first differences with far-field ghosts; the derivative the
    /// dense form uses for the compensation term.
    pub fn fd_derivative(&self, values: &[T], far: &FarField<T>) -> Vec<T> {
        let n = values.len();
        let (gl, gr) = self.ghosts(far);
        let two_h = T::lit(2.0) * self.grid.spacing();
        (0..n)
            .map(|i| {
                let left = if i == 0 { gl } else { values[i - 1] };
                let right = if i == n - 1 { gr } else { values[i + 1] };
                (right - left) / two_h
            })
            .collect()
    }

    /// Matrix-free application with a caller-supplied derivative.
    pub fn apply(&self, values: &[T], far: &FarField<T>, derivative: &[T]) -> Result<Vec<T>> {
        self.grid.check_len(values.len())?;
        self.grid.check_len(derivative.len())?;
        self.check_far(far)?;
        let n = values.len();
        let h = self.grid.spacing();
        let (gl, gr) = self.ghosts(far);
        let inv_pi = T::one() / T::PI();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let wi = values[i];
            let left = if i == 0 { gl } else { values[i - 1] };
            let right = if i == n - 1 { gr } else { values[i + 1] };
            let mut s = (left - T::lit(2.0) * wi + right) / (T::lit(2.0) * h);
            let mut acc = T::zero();
            for (j, wj) in values.iter().enumerate() {
                let m = j.abs_diff(i);
                acc = acc + self.kernel[m] * *wj;
            }
            s = s + acc - wi * self.kernel_row_sum[i];
            s = s - wi * (self.inv_z_left[i] + self.inv_z_right[i]);
            out.push(s * inv_pi + self.compensation[i] * derivative[i] + self.tail_source(far, i));
        }
        Ok(out)
    }

    /// Application with the centered-difference derivative; equals `A w + s(far)`.
    pub fn apply_fd(&self, values: &[T], far: &FarField<T>) -> Result<Vec<T>> {
        self.grid.check_len(values.len())?;
        let d = self.fd_derivative(values, far);
        self.apply(values, far, &d)
    }

    /// The linear part `A` of `L_h w = A w + s(far)`.
    pub fn matrix(&self) -> DenseMatrix<T> {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let pi = T::PI();
        let mut a = DenseMatrix::zeros(n, n);
        let nb = T::one() / (T::lit(2.0) * pi * h);
        for i in 0..n {
            let row = a.row_mut(i);
            for (j, entry) in row.iter_mut().enumerate() {
                let m = j.abs_diff(i);
                *entry = self.kernel[m] / pi;
            }
            row[i] = -(self.kernel_row_sum[i] + self.inv_z_left[i] + self.inv_z_right[i] + T::one() / h) / pi;
            let c = self.compensation[i] / (T::lit(2.0) * h);
            if i > 0 {
                row[i - 1] = row[i - 1] + nb - c;
            }
            if i + 1 < n {
                row[i + 1] = row[i + 1] + nb + c;
            }
        }
        a
    }

    /// The affine part `s(far)` of `L_h w = A w + s(far)`.
    pub fn source(&self, far: &FarField<T>) -> Result<Vec<T>> {
        self.check_far(far)?;
        let n = self.grid.len();
        let h = self.grid.spacing();
        let (gl, gr) = self.ghosts(far);
        let nb = T::one() / (T::lit(2.0) * T::PI() * h);
        let mut s: Vec<T> = (0..n).map(|i| self.tail_source(far, i)).collect();
        let two_h = T::lit(2.0) * h;
        s[0] = s[0] + gl * nb - self.compensation[0] * gl / two_h;
        s[n - 1] = s[n - 1] + gr * nb + self.compensation[n - 1] * gr / two_h;
        Ok(s)
    }
}

/// Singular-integral half-Laplacian with the default compensation radius.
pub fn apply_integral<T: Scalar>(
    grid: &Grid1D<T>,
    values: &[T],
    far: &FarField<T>,
    derivative: &[T],
) -> Result<Vec<T>> {
    IntegralOperator::with_default_radius(*grid)?.apply(values, far, derivative)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CrossValidation {
    /// Sup-norm of (spectral - integral) over the central half of the grid.
    pub sup_discrepancy: f64,
    /// Width of the arctan background removed before the spectral transform
    /// (zero when the far-field values agree and nothing was removed).
    pub background_width: f64,
}

/// Compares the two discretizations on the central half of the grid.
///
/// When the far-field constants differ, an arctan step with matching jump
/// (and, if tails are given, matching `1/x` decay) is removed before the
/// periodic transform and its exact image `-D (x-c) / (pi ((x-c)^2 + a^2))`
/// is added back.
pub fn cross_validate<T: Scalar + FftNum>(
    values: &[T],
    far: &FarField<T>,
    derivative: &[T],
    grid: &Grid1D<T>,
) -> Result<CrossValidation> {
    grid.check_len(values.len())?;
    let integral = apply_integral(grid, values, far, derivative)?;
    let jump = far.c_right - far.c_left;
    let nodes = grid.nodes();
    let (spectral, width) = if jump == T::zero() {
        (apply_spectral(grid, values)?, T::zero())
    } else {
        let b = T::lit(0.5) * (far.b_left + far.b_right);
        let width = if b * jump > T::zero() {
            T::PI() * b / jump
        } else {
            T::one()
        };
        let background: Vec<T> = nodes
            .iter()
            .map(|x| far.c_left + jump * (((*x - far.center) / width).atan() / T::PI() + T::lit(0.5)))
            .collect();
        let residual: Vec<T> = values.iter().zip(&background).map(|(v, b)| *v - *b).collect();
        let mut s = apply_spectral(grid, &residual)?;
        for (sj, x) in s.iter_mut().zip(&nodes) {
            let y = *x - far.center;
            *sj = *sj - jump * y / (T::PI() * (y * y + width * width));
        }
        (s, width)
    };
    let range = grid.interior();
    Ok(CrossValidation {
        sup_discrepancy: sup_diff(&spectral[range.clone()], &integral[range]).as_f64(),
        background_width: width.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::sup_norm;
    use std::f64::consts::PI;

    fn layer(a: f64, x: f64) -> f64 {
        (x / a).atan() / PI + 0.5
    }

    fn layer_derivative(a: f64, x: f64) -> f64 {
        a / (PI * (x * x + a * a))
    }

    /// Brute-force principal value on the symmetric form, mapped to (0, 1).
    fn oracle(f: impl Fn(f64) -> f64, second: f64, ends: f64, x: f64) -> f64 {
        let panels = 200_000;
        let g = |s: f64| {
            if s == 0.0 {
                return second;
            }
            if s >= 1.0 {
                return ends - 2.0 * f(x);
            }
            let z = s / (1.0 - s);
            (f(x + z) + f(x - z) - 2.0 * f(x)) / (z * z) / ((1.0 - s) * (1.0 - s))
        };
        let h = 1.0 / panels as f64;
        let mut sum = g(0.0) + g(1.0);
        for k in 1..panels {
            sum += g(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0 / PI
    }

    #[test]
    fn closed_form_layer_image_matches_brute_force_and_potential() {
        let a = 1.0;
        let p = crate::potential::make_pn_potential(a).unwrap();
        for &x in &[0.0, 0.3, 1.0, -2.5, 7.0] {
            let closed = -x / (PI * (x * x + a * a));
            let second = -2.0 * a * x / (PI * (x * x + a * a).powi(2));
            let brute = oracle(|y| layer(a, y), second, 1.0, x);
            assert!((brute - closed).abs() < 1e-9, "x={x} brute={brute} closed={closed}");
            assert!((p.w1(layer(a, x)) - closed).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_annihilates_constants() {
        let g = Grid1D::periodic(0.0, 2.0 * PI, 64).unwrap();
        let out = apply_spectral(&g, &vec![3.5; 64]).unwrap();
        assert!(sup_norm(&out) < 1e-13);
    }

    #[test]
    fn spectral_multiplier_on_trig_modes() {
        let g = Grid1D::periodic(0.0, 2.0 * PI, 128).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| (2.0 * x).cos()).collect();
        let out = apply_spectral(&g, &v).unwrap();
        for (o, x) in out.iter().zip(&x) {
            assert!((o + 2.0 * (2.0 * x).cos()).abs() < 1e-12);
        }
        let v: Vec<f64> = x.iter().map(|x| x.sin() + (3.0 * x).cos()).collect();
        let out = apply_spectral(&g, &v).unwrap();
        for (o, x) in out.iter().zip(&x) {
            assert!((o + x.sin() + 3.0 * (3.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_in_single_precision() {
        let g = Grid1D::<f32>::periodic(0.0, 2.0 * std::f32::consts::PI, 64).unwrap();
        let v: Vec<f32> = g.nodes().iter().map(|x| (3.0 * x).cos()).collect();
        let out = apply_spectral(&g, &v).unwrap();
        for (o, x) in out.iter().zip(g.nodes()) {
            assert!((o + 3.0 * (3.0 * x).cos()).abs() < 1e-4);
        }
    }

    #[test]
    fn spectral_rejects_mismatched_samples() {
        let g = Grid1D::periodic(0.0, 1.0, 32).unwrap();
        assert!(matches!(
            apply_spectral(&g, &[1.0; 31]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn integral_annihilates_constants() {
        let g = Grid1D::new(-10.0, 10.0, 257).unwrap();
        let v = vec![0.7; 257];
        let out = apply_integral(&g, &v, &FarField::constant(0.7, 0.7), &vec![0.0; 257]).unwrap();
        assert!(sup_norm(&out) < 1e-13);
    }

    #[test]
    fn integral_on_layer_matches_closed_form() {
        let g = Grid1D::new(-40.0, 40.0, 4096).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| layer(1.0, *x)).collect();
        let d: Vec<f64> = x.iter().map(|x| layer_derivative(1.0, *x)).collect();
        let far = FarField::unit_layer(1.0);
        let op = IntegralOperator::new(g, 1.0).unwrap();
        let out = op.apply(&v, &far, &d).unwrap();
        // direct evaluation at a node near x = 1 and x = 0
        let j1 = ((1.0 - g.x_min()) / g.spacing()).round() as usize;
        let x1 = x[j1];
        assert!((out[j1] + x1 / (PI * (x1 * x1 + 1.0))).abs() < 1e-6);
        let j0 = g.len() / 2;
        let x0 = x[j0];
        assert!((out[j0] + x0 / (PI * (x0 * x0 + 1.0))).abs() < 1e-6);
        assert!((-1.0 / (2.0 * PI) + 0.159155).abs() < 1e-6);
    }

    #[test]
    fn radius_choice_does_not_change_interior_values() {
        let g = Grid1D::new(-20.0, 20.0, 801).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| layer(1.0, *x)).collect();
        let d: Vec<f64> = x.iter().map(|x| layer_derivative(1.0, *x)).collect();
        let far = FarField::unit_layer(1.0);
        let r1 = IntegralOperator::new(g, 1.0).unwrap().apply(&v, &far, &d).unwrap();
        let r2 = IntegralOperator::new(g, 2.0).unwrap().apply(&v, &far, &d).unwrap();
        let range = g.interior();
        assert!(sup_diff(&r1[range.clone()], &r2[range]) < 1e-12);
        // near the boundary the two agree to quadrature accuracy
        assert!(sup_diff(&r1, &r2) < 1e-3);
    }

    #[test]
    fn radius_larger_than_grid_is_rejected() {
        let g = Grid1D::new(-1.0, 1.0, 33).unwrap();
        assert!(matches!(IntegralOperator::new(g, 5.0), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn dense_form_matches_matrix_free_form() {
        let g = Grid1D::new(-6.0, 6.0, 97).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| layer(0.5, *x) + 0.1 * (-x * x).exp()).collect();
        let far = FarField::unit_layer(2.0).with_center(0.1);
        let op = IntegralOperator::new(g, 1.0).unwrap();
        let direct = op.apply_fd(&v, &far).unwrap();
        let a = op.matrix();
        let s = op.source(&far).unwrap();
        let dense: Vec<f64> = a.matvec(&v).iter().zip(&s).map(|(p, q)| p + q).collect();
        assert!(sup_diff(&direct, &dense) < 1e-11);
    }

    #[test]
    fn pairing_is_symmetric_for_compact_bumps() {
        let g = Grid1D::new(-10.0, 10.0, 401).unwrap();
        let x = g.nodes();
        let bump = |c: f64, w: f64| -> Vec<f64> {
            x.iter()
                .map(|x| {
                    let s = (x - c) / w;
                    if s.abs() < 1.0 {
                        (1.0 - s * s).powi(3)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let u = bump(-1.0, 2.0);
        let v = bump(1.5, 1.0);
        let op = IntegralOperator::new(g, 1.0).unwrap();
        let far = FarField::zero();
        let lu = op.apply_fd(&u, &far).unwrap();
        let lv = op.apply_fd(&v, &far).unwrap();
        let lhs: f64 = lu.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&lv).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn cross_validation_on_layer_and_constants() {
        let g = Grid1D::new(-40.0, 40.0, 4096).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| layer(1.0, *x)).collect();
        let d: Vec<f64> = x.iter().map(|x| layer_derivative(1.0, *x)).collect();
        let r = cross_validate(&v, &FarField::unit_layer(1.0), &d, &g).unwrap();
        assert!(r.sup_discrepancy < 1e-3, "{r:?}");

        let c = vec![2.0; 4096];
        let r = cross_validate(&c, &FarField::constant(2.0, 2.0), &vec![0.0; 4096], &g).unwrap();
        assert!(r.sup_discrepancy < 1e-12);
    }

    #[test]
    fn cross_validation_on_periodic_mode_is_bounded_by_truncation() {
        // cos x on 20 periods: the integral path sees constant extensions
        // beyond the grid, which costs at most (2/pi) (sup|w| + |c|) / Z.
        let g = Grid1D::periodic(-20.0 * PI, 40.0 * PI, 4000).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| x.cos()).collect();
        let d: Vec<f64> = x.iter().map(|x| -x.sin()).collect();
        let far = FarField::constant(0.0, 0.0);
        let r = cross_validate(&v, &far, &d, &g).unwrap();
        let z_min = 10.0 * PI;
        assert!(r.sup_discrepancy <= 2.0 / PI / z_min + 1e-3, "{r:?}");
    }
}
