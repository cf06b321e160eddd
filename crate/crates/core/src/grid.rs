//! Uniform one-dimensional grids, constant-plus-tail far-field models and
//! cubic interpolation on sampled data.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum number of nodes accepted by [`Grid1D::new`].
pub const MIN_NODES: usize = 16;

/// Uniform grid `x_j = x_min + j h`, `j = 0..n`, with `h = (x_max - x_min)/(n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    x_min: T,
    x_max: T,
    n: usize,
    h: T,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::GridTooSmall(format!("{n} nodes, need at least {MIN_NODES}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid bounds [{x_min}, {x_max}] are not an interval"
            )));
        }
        let h = (x_max - x_min) / T::from_usize_lossy(n - 1);
        Ok(Self { x_min, x_max, n, h })
    }

    /// Grid for one period of length `length` starting at `start`; the right
    /// end point (which duplicates `start`) is excluded.
    pub fn periodic(start: T, length: T, n: usize) -> Result<Self> {
        let h = length / T::from_usize_lossy(n);
        Self::new(start, start + length - h, n)
    }

    /// Builds a grid from explicit nodes, rejecting non-uniform spacing.
    pub fn from_nodes(nodes: &[T]) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::GridTooSmall(format!(
                "{} nodes, need at least {MIN_NODES}",
                nodes.len()
            )));
        }
        let grid = Self::new(nodes[0], nodes[nodes.len() - 1], nodes.len())?;
        let deviation = nodes
            .iter()
            .enumerate()
            .map(|(j, x)| (*x - grid.node(j)).abs())
            .fold(T::zero(), T::max);
        if deviation > T::lit(1e-9) * grid.h.max(T::one()) {
            return Err(Error::NonUniformGrid {
                deviation: deviation.as_f64(),
            });
        }
        Ok(grid)
    }

    #[inline]
    pub fn x_min(&self) -> T {
        self.x_min
    }

    #[inline]
    pub fn x_max(&self) -> T {
        self.x_max
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.h
    }

    #[inline]
    pub fn node(&self, j: usize) -> T {
        self.x_min + T::from_usize_lossy(j) * self.h
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Length of the periodic cell the samples represent: `x_max - x_min + h`.
    pub fn period_length(&self) -> T {
        self.x_max - self.x_min + self.h
    }

    /// Same node indexing with every coordinate multiplied by `factor > 0`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            x_min: self.x_min * factor,
            x_max: self.x_max * factor,
            n: self.n,
            h: self.h * factor,
        }
    }

    pub fn shifted(&self, offset: T) -> Self {
        Self {
            x_min: self.x_min + offset,
            x_max: self.x_max + offset,
            ..*self
        }
    }

    /// Index range of the central half of the nodes.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.n / 4..self.n - self.n / 4
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    /// Four-point Lagrange interpolation of `values` at `x`; `None` outside the grid.
    pub fn interpolate(&self, values: &[T], x: T) -> Option<T> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.x_min) / self.h;
        let j = s.floor().to_usize().unwrap_or(0).min(self.n - 2);
        let start = j.saturating_sub(1).min(self.n - 4);
        let t = s - T::from_usize_lossy(start);
        let [x0, x1, x2, x3] = [T::zero(), T::one(), T::lit(2.0), T::lit(3.0)];
        let six = T::lit(6.0);
        let two = T::lit(2.0);
        let l0 = -(t - x1) * (t - x2) * (t - x3) / six;
        let l1 = (t - x0) * (t - x2) * (t - x3) / two;
        let l2 = -(t - x0) * (t - x1) * (t - x3) / two;
        let l3 = (t - x0) * (t - x1) * (t - x2) / six;
        let v = &values[start..start + 4];
        Some(l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3])
    }

    /// Fourth-order centered differences, second-order one-sided at the ends.
    pub fn derivative(&self, values: &[T]) -> Vec<T> {
        let n = self.n;
        let h = self.h;
        let twelve_h = T::lit(12.0) * h;
        let two_h = T::lit(2.0) * h;
        let mut d = vec![T::zero(); n];
        for j in 2..n - 2 {
            d[j] =
                (values[j - 2] - T::lit(8.0) * values[j - 1] + T::lit(8.0) * values[j + 1] - values[j + 2]) / twelve_h;
        }
        d[1] = (values[2] - values[0]) / two_h;
        d[n - 2] = (values[n - 1] - values[n - 3]) / two_h;
        d[0] = (-T::lit(3.0) * values[0] + T::lit(4.0) * values[1] - values[2]) / two_h;
        d[n - 1] = (T::lit(3.0) * values[n - 1] - T::lit(4.0) * values[n - 2] + values[n - 3]) / two_h;
        d
    }

    /// Trapezoidal integral of sampled values over `[x_min, x_max]`.
    pub fn trapezoid(&self, values: &[T]) -> T {
        let inner: T = values[1..self.n - 1].iter().copied().sum();
        self.h * (inner + (values[0] + values[self.n - 1]) * T::lit(0.5))
    }
}

/// Extension of a sampled function beyond its grid:
/// `w(y) = c_left - b_left/(y - center)` to the left and
/// `w(y) = c_right - b_right/(y - center)` to the right.
///
/// With zero tail coefficients this is the plain constant extension. The
/// tail coefficients carry the algebraic `1/y` decay of layer profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarField<T> {
    pub c_left: T,
    pub c_right: T,
    pub b_left: T,
    pub b_right: T,
    pub center: T,
}

impl<T: Scalar> FarField<T> {
    pub fn constant(c_left: T, c_right: T) -> Self {
        Self {
            c_left,
            c_right,
            b_left: T::zero(),
            b_right: T::zero(),
            center: T::zero(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(T::zero(), T::zero())
    }

    pub fn with_tails(mut self, b_left: T, b_right: T) -> Self {
        self.b_left = b_left;
        self.b_right = b_right;
        self
    }

    pub fn with_center(mut self, center: T) -> Self {
        self.center = center;
        self
    }

    /// Far field of a unit transition layer with tail `H(y) - 1/(alpha pi y)`.
    pub fn unit_layer(alpha: T) -> Self {
        let b = T::one() / (alpha * T::PI());
        Self::constant(T::zero(), T::one()).with_tails(b, b)
    }

    pub fn is_finite(&self) -> bool {
        [self.c_left, self.c_right, self.b_left, self.b_right, self.center]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Model value left of the grid (`y < center`).
    pub fn left(&self, y: T) -> T {
        self.c_left - self.b_left / (y - self.center)
    }

    /// Model value right of the grid (`y > center`).
    pub fn right(&self, y: T) -> T {
        self.c_right - self.b_right / (y - self.center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_and_degenerate_grids() {
        assert!(matches!(Grid1D::new(0.0, 1.0, 8), Err(Error::GridTooSmall(_))));
        assert!(Grid1D::new(1.0, 1.0, 32).is_err());
    }

    #[test]
    fn from_nodes_detects_nonuniform_spacing() {
        let mut nodes: Vec<f64> = (0..20).map(|j| j as f64 * 0.5).collect();
        assert!(Grid1D::from_nodes(&nodes).is_ok());
        nodes[7] += 0.01;
        assert!(matches!(Grid1D::from_nodes(&nodes), Err(Error::NonUniformGrid { .. })));
    }

    #[test]
    fn periodic_grid_excludes_right_end() {
        let g = Grid1D::periodic(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
        assert!((g.period_length() - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert_eq!(g.nodes().len(), 64);
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = Grid1D::new(-2.0, 3.0, 41).unwrap();
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
        let v: Vec<f64> = g.nodes().into_iter().map(f).collect();
        for &x in &[-2.0, -1.93, 0.0, 0.31, 2.99, 3.0] {
            assert!((g.interpolate(&v, x).unwrap() - f(x)).abs() < 1e-12);
        }
        assert!(g.interpolate(&v, 3.01).is_none());
    }

    #[test]
    fn derivative_is_fourth_order_inside() {
        let err = |n: usize| {
            let g = Grid1D::<f64>::new(0.0, 2.0, n).unwrap();
            let v: Vec<f64> = g.nodes().iter().map(|x: &f64| x.sin()).collect();
            let d = g.derivative(&v);
            (2..n - 2).map(|j| (d[j] - g.node(j).cos()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!(ratio > 14.0, "ratio {ratio}");
    }
}
