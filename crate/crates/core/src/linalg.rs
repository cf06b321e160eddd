//! Dense row-major matrices and a blocked LU factorization with partial pivoting.
//!
//! The nonlocal operators in this crate produce fully dense matrices of a few
//! thousand rows. The factorization is right-looking with a panel width of
//! [`PANEL`] columns so that the trailing update streams each row once per
//! panel instead of once per pivot.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PANEL: usize = 64;
const TILE: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = self.data[i * self.cols + j] + v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `x^T * self`.
    pub fn vecmat(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, xi) in x.iter().enumerate() {
            axpy(*xi, self.row(i), &mut out);
        }
        out
    }

    /// Factors the matrix in place. Fails on a zero pivot.
    pub fn lu(self) -> Result<LuFactor<T>> {
        LuFactor::new(self)
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

/// `P A = L U` with unit lower triangular `L`, stored compactly.
#[derive(Debug, Clone)]
pub struct LuFactor<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    pivot_ratio: T,
}

impl<T: Scalar> LuFactor<T> {
    pub fn new(a: DenseMatrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::InvalidParameter(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut lu = a.data;
        let mut perm: Vec<usize> = (0..n).collect();

        let mut kb = 0;
        while kb < n {
            let ke = (kb + PANEL).min(n);
            factor_panel(&mut lu, n, kb, ke, &mut perm)?;
            // U12 = L11^{-1} A12
            for k in kb..ke {
                for i in k + 1..ke {
                    let (top, bottom) = lu.split_at_mut(i * n);
                    let l = bottom[k];
                    if l != T::zero() {
                        let src = &top[k * n + ke..k * n + n];
                        axpy(-l, src, &mut bottom[ke..n]);
                    }
                }
            }
            // A22 -= L21 * U12, tiled over columns
            let mut jt = ke;
            while jt < n {
                let je = (jt + TILE).min(n);
                for i in ke..n {
                    let (top, bottom) = lu.split_at_mut(i * n);
                    let row_i = &mut bottom[..n];
                    for p in kb..ke {
                        let l = row_i[p];
                        if l != T::zero() {
                            axpy(-l, &top[p * n + jt..p * n + je], &mut row_i[jt..je]);
                        }
                    }
                }
                jt = je;
            }
            kb = ke;
        }

        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for k in 0..n {
            let u = lu[k * n + k].abs();
            lo = lo.min(u);
            hi = hi.max(u);
        }
        let pivot_ratio = if n == 0 { T::one() } else { lo / hi };
        Ok(Self {
            n,
            lu,
            perm,
            pivot_ratio,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest over largest pivot magnitude; a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> T {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        let n = self.n;
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s = dot(row, &x[..i]);
            x[i] = x[i] - s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s = dot(row, &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

fn factor_panel<T: Scalar>(lu: &mut [T], n: usize, kb: usize, ke: usize, perm: &mut [usize]) -> Result<()> {
    for k in kb..ke {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in k + 1..n {
            let v = lu[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == T::zero() || !best.is_finite() {
            return Err(Error::IllConditioned { ratio: 0.0 });
        }
        if p != k {
            let (top, bottom) = lu.split_at_mut(p * n);
            top[k * n..(k + 1) * n].swap_with_slice(&mut bottom[..n]);
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            let (top, bottom) = lu.split_at_mut(i * n);
            let l = bottom[k] / pivot;
            bottom[k] = l;
            if l != T::zero() {
                axpy(-l, &top[k * n + k + 1..k * n + ke], &mut bottom[k + 1..ke]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(seed: u64, len: usize) -> Vec<f64> {
        let mut s = seed;
        (0..len)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn solves_random_systems_across_panel_boundaries() {
        for &n in &[1usize, 5, 63, 64, 65, 200] {
            let entries = pseudo_random(n as u64, n * n);
            let a = DenseMatrix::from_fn(n, n, |i, j| entries[i * n + j] + if i == j { 0.1 } else { 0.0 });
            let x_true = pseudo_random(7 + n as u64, n);
            let b = a.matvec(&x_true);
            let x = a.clone().lu().unwrap().solve(&b);
            let err = crate::scalar::sup_diff(&x, &x_true);
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = DenseMatrix::from_fn(2, 2, |i, j| if i == j { 0.0 } else { 1.0 });
        let x = a.lu().unwrap().solve(&[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = DenseMatrix::<f64>::zeros(3, 3);
        assert!(matches!(a.lu(), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let a = DenseMatrix::<f32>::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let x = a.lu().unwrap().solve(&[6.0, 6.0, 6.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }
}
