//! Cubic truncation of `H⁻¹(Y) = Γ⁻¹Y + Ξ₂Λ₂(Y) + Ξ₃Λ₃(Y) + O(|Y|⁴)`.

use serde::Serialize;

use crate::change_of_vars::ChangeOfVariables;
use crate::error::Result;
use crate::matrix::Mat;
use crate::monomial::{l_matrix, lambda, r_matrix, s_check, s_hat};
use crate::scalar::Scalar;

/// `𝒫_k(A)`, the matrix with `Λ_k(A Y) = 𝒫_k(A) Λ_k(Y)`, built by the recurrence
/// `𝒫_k = (R_k 𝒫_{k-1} (Ŝ A₁₁ + Š A₁₂) + L_k 𝒫_{k-1} (Ŝ A₂₁ + Š A₂₂)) / k`.
pub fn p_operator<T: Scalar>(k: usize, a: &Mat<T>) -> Mat<T> {
    assert!(k >= 1, "𝒫_k needs k >= 1");
    assert_eq!(a.shape(), (2, 2));
    let mut p = a.clone();
    for d in 2..=k {
        let sh = s_hat::<T>(d - 1, 1);
        let sc = s_check::<T>(d - 1, 1);
        let first = sh.scale(&a[(0, 0)]).add(&sc.scale(&a[(0, 1)]));
        let second = sh.scale(&a[(1, 0)]).add(&sc.scale(&a[(1, 1)]));
        let sum = r_matrix::<T>(d)
            .matmul(&p)
            .matmul(&first)
            .add(&l_matrix::<T>(d).matmul(&p).matmul(&second));
        p = sum.scale(&(T::one() / T::from_i64(d as i64)));
    }
    p
}

/// `ℛ₂(A, B) = R₂ B (Ŝ₂,₁ A₁₁ + Š₂,₁ A₁₂) + L₂ B (Ŝ₂,₁ A₂₁ + Š₂,₁ A₂₂)`, shape 3 x 4.
///
/// `ℛ₂(Γ⁻¹, Ξ₂) Λ₃(Y)` is the cubic part of `Λ₂(Γ⁻¹Y + Ξ₂Λ₂(Y))`.
pub fn r2_operator<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    assert_eq!(a.shape(), (2, 2));
    assert_eq!(b.shape(), (2, 3));
    let sh = s_hat::<T>(2, 1);
    let sc = s_check::<T>(2, 1);
    let first = sh.scale(&a[(0, 0)]).add(&sc.scale(&a[(0, 1)]));
    let second = sh.scale(&a[(1, 0)]).add(&sc.scale(&a[(1, 1)]));
    r_matrix::<T>(2).matmul(b).matmul(&first).add(&l_matrix::<T>(2).matmul(b).matmul(&second))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSeries<T> {
    pub gamma_inv: Mat<T>,
    pub xi2: Mat<T>,
    pub xi3: Mat<T>,
}

/// `Ξ₂ = -Γ⁻¹Θ₂𝒫₂(Γ⁻¹)` and `Ξ₃ = -Γ⁻¹(Θ₂ℛ₂(Γ⁻¹, Ξ₂) + Θ₃𝒫₃(Γ⁻¹))`.
/// Missing `Θ₂`, `Θ₃` count as zero.
pub fn invert_to_cubic<T: Scalar>(cov: &ChangeOfVariables<T>) -> Result<InverseSeries<T>> {
    let gi = cov.gamma_inverse()?;
    let theta2 = cov.theta(2);
    let theta3 = cov.theta(3);
    let minus_one = -T::one();
    let xi2 = gi.matmul(&theta2).matmul(&p_operator(2, &gi)).scale(&minus_one);
    let inner = theta2.matmul(&r2_operator(&gi, &xi2)).add(&theta3.matmul(&p_operator(3, &gi)));
    let xi3 = gi.matmul(&inner).scale(&minus_one);
    Ok(InverseSeries { gamma_inv: gi, xi2, xi3 })
}

impl<T: Scalar> InverseSeries<T> {
    pub fn evaluate(&self, y: &[T; 2]) -> [T; 2] {
        let lin = self.gamma_inv.matvec(&[y[0].clone(), y[1].clone()]);
        let q = self.xi2.matvec(&lambda(2, &y[0], &y[1]));
        let c = self.xi3.matvec(&lambda(3, &y[0], &y[1]));
        [lin[0].clone() + q[0].clone() + c[0].clone(), lin[1].clone() + q[1].clone() + c[1].clone()]
    }

    pub fn to_f64(&self) -> InverseSeries<f64> {
        InverseSeries { gamma_inv: self.gamma_inv.to_f64(), xi2: self.xi2.to_f64(), xi3: self.xi3.to_f64() }
    }
}

/// Log-log slope of a residual against the input norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    /// Least-squares slope over the samples above the noise floor; `None` when
    /// every sample vanished (the truncation is exact on the probed range).
    pub slope: Option<f64>,
    /// `(norm, residual)` pairs, residual maximised over probe directions.
    pub samples: Vec<(f64, f64)>,
}

impl SlopeEstimate {
    /// Whether the residual decays at least as fast as `norm^order`.
    pub fn at_least(&self, order: f64) -> bool {
        self.slope.is_none_or(|s| s >= order)
    }
}

/// Probe radii `10^-1, 10^-1.5, ..., 10^-3`.
pub fn probe_radii() -> Vec<f64> {
    (0..5).map(|j| 10f64.powf(-1.0 - 0.5 * j as f64)).collect()
}

const PROBE_DIRECTIONS: usize = 8;

fn probe_points<T: Scalar>(r: f64) -> Vec<[T; 2]> {
    (0..PROBE_DIRECTIONS)
        .map(|i| {
            let th = (2 * i + 1) as f64 * std::f64::consts::PI / PROBE_DIRECTIONS as f64;
            [T::from_f64(r * th.cos()), T::from_f64(r * th.sin())]
        })
        .collect()
}

fn norm2<T: Scalar>(v: &[T; 2]) -> f64 {
    v[0].to_f64().hypot(v[1].to_f64())
}

/// Fits `log(residual) = slope · log(norm) + c` over `samples`, ignoring
/// residuals at or below `floor(norm)`.
pub fn fit_slope(samples: Vec<(f64, f64)>, floor: impl Fn(f64) -> f64) -> SlopeEstimate {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(r, res)| *res > floor(*r))
        .map(|(r, res)| (r.ln(), res.ln()))
        .collect();
    if pts.len() < 2 {
        return SlopeEstimate { slope: None, samples };
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    SlopeEstimate { slope: Some(sxy / sxx), samples }
}

fn noise_floor<T: Scalar>(r: f64) -> f64 {
    if T::EXACT {
        0.0
    } else {
        1e3 * f64::EPSILON * r
    }
}

/// Decay of `|H(H⁻¹_trunc(Y)) - Y|` as `|Y| -> 0`; expected order 4 or higher.
pub fn composition_residual_slope<T: Scalar>(cov: &ChangeOfVariables<T>, inv: &InverseSeries<T>) -> SlopeEstimate {
    let samples = probe_radii()
        .into_iter()
        .map(|r| {
            let worst = probe_points::<T>(r)
                .iter()
                .map(|y| {
                    let back = cov.evaluate(&inv.evaluate(y));
                    norm2(&[back[0].clone() - y[0].clone(), back[1].clone() - y[1].clone()])
                })
                .fold(0.0, f64::max);
            (r, worst)
        })
        .collect();
    fit_slope(samples, noise_floor::<T>)
}

/// Decay of `|H⁻¹_trunc(H(X)) - X|` as `|X| -> 0`.
pub fn reverse_composition_slope<T: Scalar>(cov: &ChangeOfVariables<T>, inv: &InverseSeries<T>) -> SlopeEstimate {
    let samples = probe_radii()
        .into_iter()
        .map(|r| {
            let worst = probe_points::<T>(r)
                .iter()
                .map(|x| {
                    let back = inv.evaluate(&cov.evaluate(x));
                    norm2(&[back[0].clone() - x[0].clone(), back[1].clone() - x[1].clone()])
                })
                .fold(0.0, f64::max);
            (r, worst)
        })
        .collect();
    fit_slope(samples, noise_floor::<T>)
}

/// Empirical region where the truncated inverse is trusted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustBall {
    pub radius: f64,
    /// The relative residual stayed small up to the largest probed radius.
    pub unbounded: bool,
}

/// Relative residual allowed inside the trust ball.
pub const TRUST_RELATIVE_RESIDUAL: f64 = 0.1;

/// Largest `r` on a geometric grid such that `|H(H⁻¹(Y)) - Y| < 0.1 |Y|` for all
/// probed `|Y| <= r`.
pub fn trust_ball(cov: &ChangeOfVariables<f64>, inv: &InverseSeries<f64>) -> TrustBall {
    const MIN_EXP: f64 = -4.0;
    const MAX_EXP: f64 = 3.0;
    const STEPS: usize = 140;
    let mut radius = 0.0;
    for s in 0..=STEPS {
        let r = 10f64.powf(MIN_EXP + (MAX_EXP - MIN_EXP) * s as f64 / STEPS as f64);
        let ok = (0..16).all(|i| {
            let th = i as f64 * std::f64::consts::PI / 8.0;
            let y = [r * th.cos(), r * th.sin()];
            let back = cov.evaluate(&inv.evaluate(&y));
            let err = (back[0] - y[0]).hypot(back[1] - y[1]);
            err.is_finite() && err < TRUST_RELATIVE_RESIDUAL * r
        });
        if !ok {
            return TrustBall { radius, unbounded: false };
        }
        radius = r;
    }
    TrustBall { radius, unbounded: true }
}
