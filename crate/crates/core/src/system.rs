//! Planar polynomial systems `X' = J X + Σ_k φ_k Λ_k(X)` with a steady state at the origin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::monomial::{lambda, BiPoly};
use crate::scalar::Scalar;

/// Default cutoff on `|τ|` for the "near critical" flag.
pub const DEFAULT_TAU_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPolySystem<T> {
    jacobian: Mat<T>,
    /// `phi[i]` holds the degree `i + 2` coefficients, shape 2 x (i + 3).
    phi: Vec<Mat<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfIndicator {
    pub tau: f64,
    pub delta: f64,
    pub discriminant: f64,
    /// `τ² - 4δ < 0`.
    pub complex_pair: bool,
    /// `|τ|` below the configured threshold.
    pub near_critical: bool,
    /// The averaging pipeline needs `δ > 0`.
    pub delta_positive: bool,
}

impl<T: Scalar> PlanarPolySystem<T> {
    /// Validates shapes and trims trailing zero coefficient matrices.
    ///
    /// `phi[i]` is the coefficient matrix of degree `i + 2`. An empty list is a
    /// linear system; a non-empty list of zero matrices is rejected.
    pub fn build(jacobian: Mat<T>, phi: Vec<Mat<T>>) -> Result<Self> {
        if jacobian.shape() != (2, 2) {
            return Err(Error::shape("jacobian", (2, 2), jacobian.shape()));
        }
        for (i, m) in phi.iter().enumerate() {
            let k = i + 2;
            if m.shape() != (2, k + 1) {
                return Err(Error::shape(format!("phi_{k}"), (2, k + 1), m.shape()));
            }
        }
        let declared = phi.len() + 1;
        let mut phi = phi;
        while phi.last().is_some_and(Mat::is_zero) {
            phi.pop();
        }
        if phi.is_empty() && declared >= 2 {
            return Err(Error::DegenerateLinear { declared });
        }
        Ok(Self { jacobian, phi })
    }

    pub fn jacobian(&self) -> &Mat<T> {
        &self.jacobian
    }

    /// Nonlinear degree `n`; 1 for a linear system.
    pub fn degree(&self) -> usize {
        self.phi.len() + 1
    }

    /// `φ_k` for `k >= 2`, or `J` for `k = 1`; `None` beyond the degree.
    pub fn phi(&self, k: usize) -> Option<&Mat<T>> {
        match k {
            0 => None,
            1 => Some(&self.jacobian),
            _ => self.phi.get(k - 2),
        }
    }

    /// `φ_k`, or a zero matrix when `k` exceeds the degree.
    pub fn phi_or_zero(&self, k: usize) -> Mat<T> {
        self.phi(k).cloned().unwrap_or_else(|| Mat::zeros(2, k + 1))
    }

    pub fn tau(&self) -> T {
        self.jacobian.trace()
    }

    pub fn delta(&self) -> T {
        self.jacobian.det2()
    }

    pub fn evaluate_field(&self, x: &[T; 2]) -> [T; 2] {
        let lin = self.jacobian.matvec(&[x[0].clone(), x[1].clone()]);
        let mut out = [lin[0].clone(), lin[1].clone()];
        for (i, phi) in self.phi.iter().enumerate() {
            let lam = lambda(i + 2, &x[0], &x[1]);
            let contrib = phi.matvec(&lam);
            out[0] = out[0].clone() + contrib[0].clone();
            out[1] = out[1].clone() + contrib[1].clone();
        }
        out
    }

    /// The two components of the vector field as polynomials.
    pub fn field_polys(&self) -> [BiPoly<T>; 2] {
        let mut comps = [BiPoly::zero(), BiPoly::zero()];
        for (r, comp) in comps.iter_mut().enumerate() {
            *comp = BiPoly::linear(self.jacobian[(r, 0)].clone(), self.jacobian[(r, 1)].clone());
            for (i, phi) in self.phi.iter().enumerate() {
                *comp = comp.add(&BiPoly::homogeneous(i + 2, phi.row(r).to_vec()));
            }
        }
        comps
    }

    pub fn hopf_indicator(&self, tau_threshold: f64) -> HopfIndicator {
        let tau = self.tau();
        let delta = self.delta();
        let disc = tau.clone() * tau.clone() - T::from_i64(4) * delta.clone();
        HopfIndicator {
            tau: tau.to_f64(),
            delta: delta.to_f64(),
            discriminant: disc.to_f64(),
            complex_pair: disc < T::zero(),
            near_critical: tau.to_f64().abs() < tau_threshold,
            delta_positive: delta > T::zero(),
        }
    }

    pub fn convert<S: Scalar>(&self, f: impl Fn(&T) -> S + Copy) -> PlanarPolySystem<S> {
        PlanarPolySystem { jacobian: self.jacobian.convert(f), phi: self.phi.iter().map(|m| m.convert(f)).collect() }
    }

    pub fn to_f64(&self) -> PlanarPolySystem<f64> {
        self.convert(Scalar::to_f64)
    }

    /// The system `X' = s F(X)`: same orbits, time rescaled by `s` (reversed for `s < 0`).
    pub fn time_scaled(&self, s: &T) -> Self {
        Self { jacobian: self.jacobian.scale(s), phi: self.phi.iter().map(|m| m.scale(s)).collect() }
    }

    /// Replaces `J` by `J - s I`, which lowers the trace by `2s`.
    pub fn diagonal_shift(&self, s: &T) -> Self {
        let mut jacobian = self.jacobian.clone();
        for i in 0..2 {
            jacobian[(i, i)] = jacobian[(i, i)].clone() - s.clone();
        }
        Self { jacobian, phi: self.phi.clone() }
    }
}

impl PlanarPolySystem<f64> {
    /// Allocation-free field evaluation for the integrators.
    #[inline]
    pub fn rhs(&self, x: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        let mut out = [j[(0, 0)] * x[0] + j[(0, 1)] * x[1], j[(1, 0)] * x[0] + j[(1, 1)] * x[1]];
        if self.phi.is_empty() {
            return out;
        }
        const MAX: usize = 32;
        let n = self.degree();
        if n >= MAX {
            return self.evaluate_field(&x);
        }
        let mut up = [1.0; MAX];
        let mut vp = [1.0; MAX];
        for i in 1..=n {
            up[i] = up[i - 1] * x[0];
            vp[i] = vp[i - 1] * x[1];
        }
        for (idx, phi) in self.phi.iter().enumerate() {
            let k = idx + 2;
            for i in 0..=k {
                let mono = up[k - i] * vp[i];
                out[0] += phi[(0, i)] * mono;
                out[1] += phi[(1, i)] * mono;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn normal_form(alpha: f64) -> PlanarPolySystem<f64> {
        PlanarPolySystem::build(
            Mat::from_rows(vec![vec![alpha, -1.0], vec![1.0, alpha]]),
            vec![Mat::zeros(2, 3), Mat::from_rows(vec![vec![-1.0, 0.0, -1.0, 0.0], vec![0.0, -1.0, 0.0, -1.0]])],
        )
        .unwrap()
    }

    #[test]
    fn linear_center_has_degree_one() {
        let s = PlanarPolySystem::build(Mat::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]), vec![]).unwrap();
        assert_eq!(s.degree(), 1);
        assert_eq!(s.evaluate_field(&[1.0, 0.0]), [0.0, 1.0]);
    }

    #[test]
    fn normal_form_matches_closed_form() {
        let s = normal_form(0.3);
        assert_eq!(s.degree(), 3);
        for &(x, y) in &[(0.2, -0.5), (1.0, 1.0), (-0.7, 0.1)] {
            let r2 = x * x + y * y;
            let expect = [0.3 * x - y - x * r2, x + 0.3 * y - y * r2];
            let got = s.evaluate_field(&[x, y]);
            let fast = s.rhs([x, y]);
            for i in 0..2 {
                assert!((got[i] - expect[i]).abs() < 1e-14);
                assert!((fast[i] - expect[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn normal_form_at_ones() {
        assert_eq!(normal_form(0.0).evaluate_field(&[1.0, 1.0]), [-3.0, -1.0]);
    }

    #[test]
    fn origin_is_a_steady_state() {
        assert_eq!(normal_form(0.7).evaluate_field(&[0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn shape_errors() {
        let j = Mat::<f64>::identity(2);
        let err = PlanarPolySystem::build(j.clone(), vec![Mat::zeros(2, 4)]).unwrap_err();
        assert!(matches!(err, Error::Shape { ref what, .. } if what == "phi_2"));
        assert!(PlanarPolySystem::build(Mat::<f64>::identity(3), vec![]).is_err());
        let err = PlanarPolySystem::build(j, vec![Mat::zeros(2, 3)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateLinear { declared: 2 }));
    }

    #[test]
    fn trailing_zero_blocks_are_trimmed() {
        let phi2 = Mat::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0; 3]]);
        let s = PlanarPolySystem::build(Mat::identity(2), vec![phi2, Mat::zeros(2, 4), Mat::zeros(2, 5)]).unwrap();
        assert_eq!(s.degree(), 2);
    }

    #[test]
    fn hopf_indicator_examples() {
        let rot = PlanarPolySystem::build(Mat::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]), vec![]).unwrap();
        let h = rot.hopf_indicator(DEFAULT_TAU_THRESHOLD);
        assert_eq!((h.tau, h.delta, h.complex_pair, h.near_critical), (0.0, 1.0, true, true));

        let id = PlanarPolySystem::build(Mat::<f64>::identity(2), vec![]).unwrap();
        let h = id.hopf_indicator(DEFAULT_TAU_THRESHOLD);
        assert_eq!((h.tau, h.delta, h.complex_pair, h.near_critical), (2.0, 1.0, false, false));

        let j = Mat::from_rows(vec![vec![Rational::new(1.into(), 100.into()), Rational::from_i64(-1)], vec![
            Rational::from_i64(1),
            Rational::new(1.into(), 100.into()),
        ]]);
        let nf = PlanarPolySystem::build(j, vec![]).unwrap();
        assert_eq!(nf.tau(), Rational::new(2.into(), 100.into()));
        assert_eq!(nf.delta(), Rational::new(10001.into(), 10000.into()));

        let saddle = PlanarPolySystem::build(Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, -1.0]]), vec![]).unwrap();
        assert!(!saddle.hopf_indicator(0.2).delta_positive);
    }
}
