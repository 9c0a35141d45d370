//! Homogeneous monomial vectors and the structural matrices acting on them.
//!
//! Convention used everywhere in the crate: entry `i` (0-based) of the
//! degree-`k` monomial vector is `U^(k-i) V^i`.
//!
//! * `R_k`, `L_k` ((k+1) x k) encode differentiation:
//!   `d/dt Λ_k = (U' R_k + V' L_k) Λ_(k-1)`.
//! * `Ŝ_(k,p)`, `Š_(k,p)` ((k+1) x (k+p+1)) encode multiplication by `U^p`, `V^p`:
//!   `U^p Λ_k = Ŝ_(k,p) Λ_(k+p)` and `V^p Λ_k = Š_(k,p) Λ_(k+p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialVector<T> {
    pub degree: usize,
    pub values: Vec<T>,
}

/// Evaluates `Λ_k(U, V)`. Degree zero is rejected: constants have no place in
/// the expansions built on this basis.
pub fn eval_lambda<T: Scalar>(k: usize, u: &T, v: &T) -> Result<MonomialVector<T>> {
    if k == 0 {
        return Err(Error::ZeroDegree);
    }
    Ok(MonomialVector { degree: k, values: lambda(k, u, v) })
}

/// `Λ_k(U, V)` without the degree check (`k = 0` yields `[1]`).
pub(crate) fn lambda<T: Scalar>(k: usize, u: &T, v: &T) -> Vec<T> {
    let mut u_pows = Vec::with_capacity(k + 1);
    let mut v_pows = Vec::with_capacity(k + 1);
    u_pows.push(T::one());
    v_pows.push(T::one());
    for i in 1..=k {
        u_pows.push(u_pows[i - 1].clone() * u.clone());
        v_pows.push(v_pows[i - 1].clone() * v.clone());
    }
    (0..=k).map(|i| u_pows[k - i].clone() * v_pows[i].clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructuralKind {
    R,
    L,
    SHat,
    SCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMatrix<T> {
    pub kind: StructuralKind,
    pub k: usize,
    pub p: Option<usize>,
    pub entries: Mat<T>,
}

pub fn structural_matrix<T: Scalar>(kind: StructuralKind, k: usize, p: Option<usize>) -> Result<StructuralMatrix<T>> {
    if k == 0 {
        return Err(Error::ZeroDegree);
    }
    let entries = match (kind, p) {
        (StructuralKind::R, None) => r_matrix(k),
        (StructuralKind::L, None) => l_matrix(k),
        (StructuralKind::SHat, Some(p)) => s_hat(k, p),
        (StructuralKind::SCheck, Some(p)) => s_check(k, p),
        (StructuralKind::R | StructuralKind::L, Some(_)) => {
            return Err(Error::InvalidArgument("R and L take no shift parameter".into()))
        }
        (_, None) => return Err(Error::InvalidArgument("shift matrices need a shift parameter p".into())),
    };
    Ok(StructuralMatrix { kind, k, p, entries })
}

/// `R_k`: entry `(i, i) = k - i` for `i < k`.
pub fn r_matrix<T: Scalar>(k: usize) -> Mat<T> {
    Mat::from_fn(k + 1, k, |i, j| if i == j { T::from_i64((k - i) as i64) } else { T::zero() })
}

/// `L_k`: entry `(i + 1, i) = i + 1`.
pub fn l_matrix<T: Scalar>(k: usize) -> Mat<T> {
    Mat::from_fn(k + 1, k, |i, j| if i == j + 1 { T::from_i64(i as i64) } else { T::zero() })
}

/// `Ŝ_(k,p) = [I_(k+1) | 0]`.
pub fn s_hat<T: Scalar>(k: usize, p: usize) -> Mat<T> {
    Mat::from_fn(k + 1, k + p + 1, |i, j| if i == j { T::one() } else { T::zero() })
}

/// `Š_(k,p) = [0 | I_(k+1)]`.
pub fn s_check<T: Scalar>(k: usize, p: usize) -> Mat<T> {
    Mat::from_fn(k + 1, k + p + 1, |i, j| if j == i + p { T::one() } else { T::zero() })
}

/// Bivariate polynomial stored by homogeneous components in the `Λ_k` basis:
/// `p(U, V) = Σ_d comps[d] · Λ_d(U, V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiPoly<T> {
    comps: Vec<Vec<T>>,
}

impl<T: Scalar> BiPoly<T> {
    pub fn zero() -> Self {
        Self { comps: Vec::new() }
    }

    /// A single homogeneous component `coeffs · Λ_d`.
    pub fn homogeneous(d: usize, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), d + 1, "degree-{d} component needs {} coefficients", d + 1);
        let mut comps: Vec<Vec<T>> = (0..d).map(|j| vec![T::zero(); j + 1]).collect();
        comps.push(coeffs);
        Self { comps }.trimmed()
    }

    /// `a U + b V`.
    pub fn linear(a: T, b: T) -> Self {
        Self::homogeneous(1, vec![a, b])
    }

    pub fn constant(c: T) -> Self {
        Self::homogeneous(0, vec![c])
    }

    /// Coefficient vector of degree `d` (zeros when absent).
    pub fn component(&self, d: usize) -> Vec<T> {
        self.comps.get(d).cloned().unwrap_or_else(|| vec![T::zero(); d + 1])
    }

    /// Highest degree with a nonzero coefficient, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.comps.iter().rposition(|c| c.iter().any(|v| !v.is_zero()))
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    fn trimmed(mut self) -> Self {
        let keep = self.degree().map_or(0, |d| d + 1);
        self.comps.truncate(keep);
        self
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        let n = self.comps.len().max(rhs.comps.len());
        let comps = (0..n)
            .map(|d| {
                self.component(d)
                    .into_iter()
                    .zip(rhs.component(d))
                    .map(|(a, b)| f(a, b))
                    .collect()
            })
            .collect();
        Self { comps }.trimmed()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: &T) -> Self {
        Self { comps: self.comps.iter().map(|c| c.iter().map(|v| v.clone() * s.clone()).collect()).collect() }
            .trimmed()
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        self.mul_truncated(rhs, usize::MAX)
    }

    /// Product with all terms of degree above `max_deg` dropped.
    pub fn mul_truncated(&self, rhs: &Self, max_deg: usize) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::zero();
        }
        let top = (self.comps.len() + rhs.comps.len() - 2).min(max_deg);
        let mut comps: Vec<Vec<T>> = (0..=top).map(|d| vec![T::zero(); d + 1]).collect();
        for (a, ca) in self.comps.iter().enumerate() {
            for (b, cb) in rhs.comps.iter().enumerate() {
                if a + b > top {
                    continue;
                }
                for (i, x) in ca.iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    for (j, y) in cb.iter().enumerate() {
                        if !y.is_zero() {
                            let slot = &mut comps[a + b][i + j];
                            *slot = slot.clone() + x.clone() * y.clone();
                        }
                    }
                }
            }
        }
        Self { comps }.trimmed()
    }

    pub fn truncate(&self, max_deg: usize) -> Self {
        let mut comps = self.comps.clone();
        comps.truncate(max_deg + 1);
        Self { comps }.trimmed()
    }

    /// `∂p/∂U`; the degree-`k` block maps through `R_kᵀ`.
    pub fn partial_u(&self) -> Self {
        let comps = (1..self.comps.len())
            .map(|k| (0..k).map(|i| T::from_i64((k - i) as i64) * self.comps[k][i].clone()).collect())
            .collect::<Vec<Vec<T>>>();
        Self::shift_down(comps)
    }

    /// `∂p/∂V`; the degree-`k` block maps through `L_kᵀ`.
    pub fn partial_v(&self) -> Self {
        let comps = (1..self.comps.len())
            .map(|k| (0..k).map(|i| T::from_i64((i + 1) as i64) * self.comps[k][i + 1].clone()).collect())
            .collect::<Vec<Vec<T>>>();
        Self::shift_down(comps)
    }

    fn shift_down(comps: Vec<Vec<T>>) -> Self {
        Self { comps }.trimmed()
    }

    pub fn eval(&self, u: &T, v: &T) -> T {
        self.comps
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (d, c)| acc + crate::matrix::dot(c, &lambda(d, u, v)))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.comps.iter().flatten().map(|v| v.to_f64().abs()).fold(0.0, f64::max)
    }

    /// Substitutes `U -> x(U, V)`, `V -> y(U, V)` and keeps degrees up to `max_deg`.
    pub fn compose(&self, x: &Self, y: &Self, max_deg: usize) -> Self {
        let Some(deg) = self.degree() else { return Self::zero() };
        let powers = |p: &Self| {
            let mut out = vec![Self::constant(T::one())];
            for i in 1..=deg {
                out.push(out[i - 1].mul_truncated(p, max_deg));
            }
            out
        };
        let xp = powers(x);
        let yp = powers(y);
        let mut acc = Self::zero();
        for (d, c) in self.comps.iter().enumerate() {
            for (i, coeff) in c.iter().enumerate() {
                if coeff.is_zero() {
                    continue;
                }
                let term = xp[d - i].mul_truncated(&yp[i], max_deg).scale(coeff);
                acc = acc.add(&term);
            }
        }
        acc
    }
}

/// Splits a matrix whose rows hold degree-`k` coefficients into per-row polynomials.
pub fn rows_as_polys<T: Scalar>(k: usize, m: &Mat<T>) -> Vec<BiPoly<T>> {
    (0..m.rows()).map(|i| BiPoly::homogeneous(k, m.row(i).to_vec())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(eval_lambda(2, &2.0, &3.0).unwrap().values, vec![4.0, 6.0, 9.0]);
        assert_eq!(eval_lambda(1, &0.3, &-0.7).unwrap().values, vec![0.3, -0.7]);
        assert_eq!(eval_lambda(3, &1.0, &2.0).unwrap().values, vec![1.0, 2.0, 4.0, 8.0]);
        assert!(matches!(eval_lambda(0, &1.0, &1.0), Err(Error::ZeroDegree)));
    }

    #[test]
    fn lambda_at_ones_is_all_ones() {
        for k in 1..8 {
            let v = eval_lambda(k, &q(1), &q(1)).unwrap();
            assert_eq!(v.values.len(), k + 1);
            assert!(v.values.iter().all(|x| *x == q(1)));
        }
    }

    #[test]
    fn structural_examples() {
        let r: StructuralMatrix<Rational> = structural_matrix(StructuralKind::R, 2, None).unwrap();
        assert_eq!(r.entries, Mat::from_i64(&[&[2, 0], &[0, 1], &[0, 0]]));
        let l: StructuralMatrix<Rational> = structural_matrix(StructuralKind::L, 2, None).unwrap();
        assert_eq!(l.entries, Mat::from_i64(&[&[0, 0], &[1, 0], &[0, 2]]));
        let s: StructuralMatrix<Rational> = structural_matrix(StructuralKind::SHat, 2, Some(1)).unwrap();
        assert_eq!(s.entries, Mat::from_i64(&[&[1, 0, 0, 0], &[0, 1, 0, 0], &[0, 0, 1, 0]]));
        let c: StructuralMatrix<Rational> = structural_matrix(StructuralKind::SCheck, 1, Some(2)).unwrap();
        assert_eq!(c.entries, Mat::from_i64(&[&[0, 0, 1, 0], &[0, 0, 0, 1]]));
    }

    #[test]
    fn structural_preconditions() {
        assert!(structural_matrix::<f64>(StructuralKind::R, 0, None).is_err());
        assert!(structural_matrix::<f64>(StructuralKind::R, 2, Some(1)).is_err());
        assert!(structural_matrix::<f64>(StructuralKind::SHat, 2, None).is_err());
    }

    #[test]
    fn shift_matrices_have_one_unit_per_row() {
        for k in 1..6 {
            for p in 0..4 {
                for m in [s_hat::<Rational>(k, p), s_check(k, p)] {
                    assert_eq!(m.shape(), (k + 1, k + p + 1));
                    for i in 0..m.rows() {
                        let ones = m.row(i).iter().filter(|v| **v == q(1)).count();
                        let zeros = m.row(i).iter().filter(|v| **v == q(0)).count();
                        assert_eq!((ones, zeros), (1, k + p));
                    }
                }
            }
        }
    }

    #[test]
    fn column_sums_of_r_plus_l_equal_k_plus_one() {
        for k in 1..10 {
            let s = r_matrix::<Rational>(k).add(&l_matrix(k));
            for j in 0..k {
                let total = s.column(j).into_iter().fold(q(0), |a, b| a + b);
                assert_eq!(total, q(k as i64 + 1));
            }
        }
    }

    #[test]
    fn polynomial_derivatives() {
        // p = U^2 V + 3 V^3
        let p = BiPoly::homogeneous(3, vec![q(0), q(1), q(0), q(3)]);
        assert_eq!(p.partial_u(), BiPoly::homogeneous(2, vec![q(0), q(2), q(0)]));
        assert_eq!(p.partial_v(), BiPoly::homogeneous(2, vec![q(1), q(0), q(9)]));
        assert_eq!(BiPoly::<Rational>::constant(q(5)).partial_u(), BiPoly::zero());
    }

    #[test]
    fn compose_with_identity_and_shear() {
        let p = BiPoly::homogeneous(2, vec![q(1), q(2), q(3)]);
        let u = BiPoly::linear(q(1), q(0));
        let v = BiPoly::linear(q(0), q(1));
        assert_eq!(p.compose(&u, &v, 10), p);
        // U -> U + V: (U+V)^2 + 2(U+V)V + 3V^2 = U^2 + 4UV + 6V^2
        let shear = BiPoly::linear(q(1), q(1));
        assert_eq!(p.compose(&shear, &v, 10), BiPoly::homogeneous(2, vec![q(1), q(4), q(6)]));
    }
}
