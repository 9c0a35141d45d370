//! Small dense matrices over a [`Scalar`] and the two linear-solve backends.
//!
//! Sizes in this crate stay in the low hundreds, so everything is a row-major
//! `Vec`. Exact solves go through reduced row echelon form; float solves go
//! through an SVD with a relative singular-value cutoff.

use std::fmt;

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::scalar::{Rational, Scalar};

/// Singular values below `SVD_RANK_CUTOFF * sigma_max` count as zero.
pub const SVD_RANK_CUTOFF: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from rows. Panics when rows have different lengths.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
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

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&v| T::from_i64(v)).collect()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn scale(&self, s: &T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v.clone() * s.clone()).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch {:?} x {:?}", self.shape(), rhs.shape());
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if !b.is_zero() {
                        let cur = out[(i, j)].clone();
                        out[(i, j)] = cur + a.clone() * b.clone();
                    }
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().powi(2)).sum::<f64>().sqrt()
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(Scalar::to_f64).collect() }
    }

    pub fn convert<S: Scalar>(&self, f: impl Fn(&T) -> S) -> Mat<S> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn to_nested_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(Scalar::to_f64).collect()).collect()
    }

    /// Determinant of a 2x2 matrix.
    pub fn det2(&self) -> T {
        assert_eq!(self.shape(), (2, 2));
        self[(0, 0)].clone() * self[(1, 1)].clone() - self[(0, 1)].clone() * self[(1, 0)].clone()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)].clone())
    }

    /// Inverse of a 2x2 matrix, `None` when the determinant is negligible.
    pub fn inverse2(&self, tol: f64) -> Option<Self> {
        let det = self.det2();
        if det.is_negligible(tol) {
            return None;
        }
        let m = &self.data;
        Some(Self::from_rows(vec![
            vec![m[3].clone() / det.clone(), -m[1].clone() / det.clone()],
            vec![-m[2].clone() / det.clone(), m[0].clone() / det],
        ]))
    }

    /// Writes `block` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)].clone();
            }
        }
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}", self.rows, self.cols)?;
        f.debug_list().entries(self.data.chunks(self.cols.max(1))).finish()
    }
}

/// Linear-algebra operations whose implementation depends on the arithmetic.
pub trait Solver: Scalar {
    fn rank(a: &Mat<Self>) -> usize;

    /// Minimum Euclidean-norm solution of `a x = b`, or `None` when inconsistent.
    fn solve_min_norm(a: &Mat<Self>, b: &[Self]) -> Option<Vec<Self>>;

    /// Tolerance for zero tests on quantities of unit scale.
    fn zero_tol() -> f64;
}

impl Solver for f64 {
    fn rank(a: &Mat<f64>) -> usize {
        if a.rows == 0 || a.cols == 0 {
            return 0;
        }
        let sv = to_dmatrix(a).singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > SVD_RANK_CUTOFF * max).count()
    }

    fn solve_min_norm(a: &Mat<f64>, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(a.rows, b.len());
        if a.cols == 0 {
            return b.iter().all(|v| v.abs() < 1e-12).then(Vec::new);
        }
        let m = to_dmatrix(a);
        let svd = m.clone().svd(true, true);
        let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = if max == 0.0 {
            nalgebra::DVector::zeros(a.cols)
        } else {
            svd.solve(&rhs, SVD_RANK_CUTOFF * max).ok()?
        };
        let resid = (&m * &x - &rhs).norm();
        let scale = m.norm() * x.norm() + rhs.norm();
        if resid > 1e-9 * scale.max(1e-300) && resid > 1e-14 {
            return None;
        }
        Some(x.iter().copied().collect())
    }

    fn zero_tol() -> f64 {
        1e-12
    }
}

impl Solver for Rational {
    fn rank(a: &Mat<Rational>) -> usize {
        let mut m = a.clone();
        rref(&mut m, a.cols).len()
    }

    fn solve_min_norm(a: &Mat<Rational>, b: &[Rational]) -> Option<Vec<Rational>> {
        let particular = solve_exact(a, b)?;
        let basis = nullspace(a);
        if basis.is_empty() {
            return Some(particular);
        }
        // project the particular solution onto the orthogonal complement of the nullspace
        let k = basis.len();
        let gram = Mat::from_fn(k, k, |i, j| dot(&basis[i], &basis[j]));
        let rhs: Vec<Rational> = basis.iter().map(|v| dot(v, &particular)).collect();
        let coeffs = solve_exact(&gram, &rhs).expect("Gram matrix of a basis is invertible");
        let mut x = particular;
        for (c, v) in coeffs.iter().zip(&basis) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi = xi.clone() - c.clone() * vi.clone();
            }
        }
        Some(x)
    }

    fn zero_tol() -> f64 {
        0.0
    }
}

fn to_dmatrix(a: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows, a.cols, &a.data)
}

/// Reduces the first `ncols` columns of `m` in place to reduced row echelon form
/// (row operations act on the whole row) and returns the pivot columns.
///
/// Pivots are chosen among the nonzero candidates of a column by smallest
/// numerator/denominator size, which keeps intermediate growth in check.
pub fn rref(m: &mut Mat<Rational>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row == m.rows {
            break;
        }
        let pick = (row..m.rows)
            .filter(|&r| !m[(r, col)].is_zero())
            .min_by_key(|&r| {
                let v = &m[(r, col)];
                v.numer().bits() + v.denom().bits()
            });
        let Some(p) = pick else { continue };
        if p != row {
            for j in 0..m.cols {
                m.data.swap(p * m.cols + j, row * m.cols + j);
            }
        }
        let inv = Rational::from_i64(1) / m[(row, col)].clone();
        for j in 0..m.cols {
            let v = m[(row, j)].clone();
            if !v.is_zero() {
                m[(row, j)] = v * inv.clone();
            }
        }
        for r in 0..m.rows {
            if r == row || m[(r, col)].is_zero() {
                continue;
            }
            let factor = m[(r, col)].clone();
            for j in 0..m.cols {
                let pv = &m[(row, j)];
                if !pv.is_zero() {
                    let updated = m[(r, j)].clone() - factor.clone() * pv.clone();
                    m[(r, j)] = updated;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// One solution of `a x = b` (free variables set to zero), or `None` when inconsistent.
pub fn solve_exact(a: &Mat<Rational>, b: &[Rational]) -> Option<Vec<Rational>> {
    assert_eq!(a.rows, b.len());
    let n = a.cols;
    let mut aug = Mat::zeros(a.rows, n + 1);
    for i in 0..a.rows {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)].clone();
        }
        aug[(i, n)] = b[i].clone();
    }
    let pivots = rref(&mut aug, n);
    if (pivots.len()..aug.rows).any(|r| !aug[(r, n)].is_zero()) {
        return None;
    }
    let mut x = vec![Rational::zero(); n];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = aug[(r, n)].clone();
    }
    Some(x)
}

/// Basis of the right nullspace of `a`, one vector per free column.
pub fn nullspace(a: &Mat<Rational>) -> Vec<Vec<Rational>> {
    let mut m = a.clone();
    let pivots = rref(&mut m, a.cols);
    let free: Vec<usize> = (0..a.cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); a.cols];
            v[f] = Rational::from_i64(1);
            for (r, &c) in pivots.iter().enumerate() {
                v[c] = -m[(r, f)].clone();
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    #[test]
    fn exact_rank_and_nullspace() {
        let a: Mat<Rational> = Mat::from_i64(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(Rational::rank(&a), 2);
        let ns = nullspace(&a);
        assert_eq!(ns.len(), 1);
        assert!(a.matvec(&ns[0]).iter().all(Zero::is_zero));
    }

    #[test]
    fn min_norm_solution_matches_pseudo_inverse() {
        // x + y = 2 has minimum-norm solution (1, 1)
        let a: Mat<Rational> = Mat::from_i64(&[&[1, 1]]);
        let x = Rational::solve_min_norm(&a, &[q(2)]).unwrap();
        assert_eq!(x, vec![q(1), q(1)]);
        let xf = f64::solve_min_norm(&a.to_f64(), &[2.0]).unwrap();
        assert!((xf[0] - 1.0).abs() < 1e-12 && (xf[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_systems_have_no_solution() {
        let a: Mat<Rational> = Mat::from_i64(&[&[1, 1], &[2, 2]]);
        assert!(Rational::solve_min_norm(&a, &[q(1), q(3)]).is_none());
        assert!(f64::solve_min_norm(&a.to_f64(), &[1.0, 3.0]).is_none());
    }

    #[test]
    fn float_rank_uses_relative_cutoff() {
        let a = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1e-12]]);
        assert_eq!(f64::rank(&a), 1);
        let b = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1e-8]]);
        assert_eq!(f64::rank(&b), 2);
    }

    #[test]
    fn inverse_of_2x2() {
        let a: Mat<Rational> = Mat::from_i64(&[&[2, 1], &[1, 1]]);
        let inv = a.inverse2(0.0).unwrap();
        assert_eq!(a.matmul(&inv), Mat::identity(2));
        let singular: Mat<Rational> = Mat::from_i64(&[&[1, 2], &[2, 4]]);
        assert!(singular.inverse2(0.0).is_none());
    }
}
