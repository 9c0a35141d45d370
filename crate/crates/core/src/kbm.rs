//! Second-order equation `z'' - τz' + δz = G(z, z')` for `z = Π₁H(X)`, its cubic
//! truncation, and the first-order KBM averaging that predicts the limit cycle.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::change_of_vars::ChangeOfVariables;
use crate::error::{Error, Result};
use crate::inversion::{p_operator, r2_operator, InverseSeries};
use crate::matrix::Mat;
use crate::monomial::{l_matrix, r_matrix, s_check, s_hat};
use crate::scalar::Scalar;
use crate::system::PlanarPolySystem;

/// `G(Y) = 𝒢₂·Λ₂(Y) + 𝒢₃·Λ₃(Y) + O(|Y|⁴)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GCoefficients<T> {
    pub g2: Vec<T>,
    pub g3: Vec<T>,
}

impl<T: Scalar> GCoefficients<T> {
    pub fn to_f64(&self) -> GCoefficients<f64> {
        GCoefficients { g2: self.g2.iter().map(Scalar::to_f64).collect(), g3: self.g3.iter().map(Scalar::to_f64).collect() }
    }
}

fn row_as_column<T: Scalar>(m: &Mat<T>, r: usize) -> Mat<T> {
    Mat::from_fn(m.cols(), 1, |i, _| m[(r, i)].clone())
}

fn column_to_vec<T: Scalar>(m: &Mat<T>) -> Vec<T> {
    m.column(0)
}

/// `𝒮_k(A, B) = (A₁₁Ŝᵀ + A₁₂Šᵀ) R_kᵀ Π₂B + (A₂₁Ŝᵀ + A₂₂Šᵀ) L_kᵀ Π₂B`, shifts `(k-1, 1)`.
///
/// With `A = J` and `B = Θ_k`, it is the coefficient vector of `∇(Π₂Θ_kΛ_k)(X)·JX` in `Λ_k(X)`.
pub fn s_operator<T: Scalar>(k: usize, a: &Mat<T>, b: &Mat<T>) -> Vec<T> {
    assert_eq!(a.shape(), (2, 2));
    assert_eq!(b.shape(), (2, k + 1));
    let sh = s_hat::<T>(k - 1, 1).transpose();
    let sc = s_check::<T>(k - 1, 1).transpose();
    let b2 = row_as_column(b, 1);
    let first = sh.scale(&a[(0, 0)]).add(&sc.scale(&a[(0, 1)])).matmul(&r_matrix::<T>(k).transpose()).matmul(&b2);
    let second = sh.scale(&a[(1, 0)]).add(&sc.scale(&a[(1, 1)])).matmul(&l_matrix::<T>(k).transpose()).matmul(&b2);
    column_to_vec(&first.add(&second))
}

/// `𝒯(A, B) = (2A₂₁Ŝᵀ + A₂₂Šᵀ) Π₁B + (A₂₂Ŝᵀ + 2A₂₃Šᵀ) Π₂B`, shifts `(2, 1)`.
///
/// With `A = Θ₂` and `B = φ₂`, it is the coefficient vector of `∇(Π₂Θ₂Λ₂)(X)·φ₂Λ₂(X)` in `Λ₃(X)`.
pub fn t_operator<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Vec<T> {
    assert_eq!(a.shape(), (2, 3));
    assert_eq!(b.shape(), (2, 3));
    let sh = s_hat::<T>(2, 1).transpose();
    let sc = s_check::<T>(2, 1).transpose();
    let two = T::from_i64(2);
    let first = sh.scale(&(two.clone() * a[(1, 0)].clone())).add(&sc.scale(&a[(1, 1)])).matmul(&row_as_column(b, 0));
    let second = sh.scale(&a[(1, 1)]).add(&sc.scale(&(two * a[(1, 2)].clone()))).matmul(&row_as_column(b, 1));
    column_to_vec(&first.add(&second))
}

fn mat_t_vec<T: Scalar>(m: &Mat<T>, v: &[T]) -> Vec<T> {
    m.transpose().matvec(v)
}

fn add_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| x.clone() + y.clone()).collect()
}

/// Assembles `𝒢₂` and `𝒢₃`. Missing `Θ₃`, `φ₂`, `φ₃` count as zero.
pub fn g_coefficients<T: Scalar>(
    system: &PlanarPolySystem<T>,
    cov: &ChangeOfVariables<T>,
    inv: &InverseSeries<T>,
) -> Result<GCoefficients<T>> {
    let j = system.jacobian();
    let gamma = &cov.gamma;
    let gi = &inv.gamma_inv;
    if gamma.shape() != (2, 2) || gi.shape() != (2, 2) {
        return Err(Error::shape("gamma", (2, 2), gamma.shape()));
    }
    if inv.xi2.shape() != (2, 3) {
        return Err(Error::shape("xi_2", (2, 3), inv.xi2.shape()));
    }
    if inv.xi3.shape() != (2, 4) {
        return Err(Error::shape("xi_3", (2, 4), inv.xi3.shape()));
    }
    let phi2 = system.phi_or_zero(2);
    let phi3 = system.phi_or_zero(3);
    let theta2 = cov.theta(2);
    let theta3 = cov.theta(3);
    let gj = gamma.matmul(j);
    let p2 = p_operator(2, gi);
    let p3 = p_operator(3, gi);
    let r2 = r2_operator(gi, &inv.xi2);
    let s2 = s_operator(2, j, &theta2);
    let s3 = s_operator(3, j, &theta3);
    let tt = t_operator(&theta2, &phi2);

    let lin2 = gj.matmul(&inv.xi2).add(&gamma.matmul(&phi2).matmul(&p2));
    let g2 = add_vec(lin2.row(1), &mat_t_vec(&p2, &s2));

    let lin3 = gj.matmul(&inv.xi3).add(&gamma.matmul(&phi2).matmul(&r2)).add(&gamma.matmul(&phi3).matmul(&p3));
    let g3 = add_vec(&add_vec(lin3.row(1), &mat_t_vec(&r2, &s2)), &mat_t_vec(&p3, &add_vec(&s3, &tt)));
    Ok(GCoefficients { g2, g3 })
}

/// First-order averages of the cubic term along `(cos φ, -√δ sin φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Averages {
    /// `(1/2π) ∫ 𝒢₃·Λ₃(cos φ, -√δ sin φ) sin φ dφ`.
    pub p3: f64,
    /// Same integral against `cos φ`.
    pub q3: f64,
}

/// Closed forms of the averages: `p₃ = -(√δ/8) g₂ - (3δ^{3/2}/8) g₄`, `q₃ = (3/8) g₁ + (δ/8) g₃`.
pub fn p3_q3(g3: &[f64], delta: f64) -> Averages {
    assert_eq!(g3.len(), 4, "𝒢₃ has four entries");
    let sd = delta.sqrt();
    Averages {
        p3: -sd / 8.0 * g3[1] - 3.0 * delta * sd / 8.0 * g3[3],
        q3: 3.0 / 8.0 * g3[0] + delta / 8.0 * g3[2],
    }
}

/// Like [`p3_q3`], but decides `p₃ = 0` from `g₂ + 3δg₄ = 0` in the native arithmetic
/// (exactly for rationals, relative to `1e-12` for floats) and then reports `p₃` as `0.0`.
pub fn averages<T: Scalar>(g3: &[T], delta: &T) -> Averages {
    let g: Vec<f64> = g3.iter().map(Scalar::to_f64).collect();
    let mut out = p3_q3(&g, delta.to_f64());
    let combo = g3[1].clone() + T::from_i64(3) * delta.clone() * g3[3].clone();
    let scale = g[1].abs().max((3.0 * delta.to_f64() * g[3]).abs());
    if combo.is_negligible(1e-12 * scale) {
        out.p3 = 0.0;
    }
    out
}

/// Which closed form is used for the averaged amplitude and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `r₀² = δ/(2|p₃|)`, `ω₀ = 1 - (τ/2) q₃/p₃`.
    Paper,
    /// `r₀² = √δ/(2|p₃|)`, `ω₀ = 1 - τ q₃/(2√δ p₃)`: the damping term of the
    /// rescaled equation carries a `1/√δ`.
    #[default]
    Rederived,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Paper => "paper",
            Variant::Rederived => "rederived",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Variant::Paper),
            "rederived" => Ok(Variant::Rederived),
            _ => Err(Error::InvalidArgument(format!("unknown variant {s:?}; expected paper or rederived"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Existence {
    /// `sign(τ) = sign(p₃)`: at least one limit cycle near the origin.
    Exists,
    /// `p₃ ≠ 0` with the opposite sign to `τ`, or `τ = 0`.
    SignMismatch,
    /// `p₃ = 0`: the averaged cubic term gives no information.
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableSupercritical,
    UnstableSubcritical,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KbmPrediction {
    pub tau: f64,
    pub delta: f64,
    pub p3: f64,
    pub q3: f64,
    pub variant: Variant,
    pub existence: Existence,
    pub exists: bool,
    /// Amplitude of the rescaled oscillation `ς`.
    pub r0: Option<f64>,
    /// Relative frequency correction of `ς`.
    pub omega0: Option<f64>,
    /// Amplitude of `z`: `√|τ| r₀`.
    pub z_amplitude: Option<f64>,
    /// Angular frequency in original time: `√δ ω₀`.
    pub angular_frequency: Option<f64>,
    pub period: Option<f64>,
    /// Valid only if the cycle is the unique one near the origin.
    pub stability: Stability,
}

/// Steady state of the averaged amplitude equation.
pub fn predict_cycle(tau: f64, delta: f64, p3: f64, q3: f64, variant: Variant) -> Result<KbmPrediction> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::NonPositiveDeterminant(delta));
    }
    let existence = if p3 == 0.0 {
        Existence::Undetermined
    } else if tau != 0.0 && tau.signum() == p3.signum() {
        Existence::Exists
    } else {
        Existence::SignMismatch
    };
    let mut out = KbmPrediction {
        tau,
        delta,
        p3,
        q3,
        variant,
        existence,
        exists: existence == Existence::Exists,
        r0: None,
        omega0: None,
        z_amplitude: None,
        angular_frequency: None,
        period: None,
        stability: Stability::Undetermined,
    };
    if !out.exists {
        return Ok(out);
    }
    let sd = delta.sqrt();
    let (r0_sq, omega0) = match variant {
        Variant::Paper => (delta / (2.0 * p3.abs()), 1.0 - tau / 2.0 * q3 / p3),
        Variant::Rederived => (sd / (2.0 * p3.abs()), 1.0 - tau * q3 / (2.0 * sd * p3)),
    };
    let r0 = r0_sq.sqrt();
    out.r0 = Some(r0);
    out.omega0 = Some(omega0);
    out.z_amplitude = Some(tau.abs().sqrt() * r0);
    let freq = sd * omega0;
    out.angular_frequency = Some(freq);
    out.period = (freq > 0.0).then(|| 2.0 * PI / freq);
    out.stability = if tau > 0.0 { Stability::StableSupercritical } else { Stability::UnstableSubcritical };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CyclePoint {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

/// `X(t) = Γ⁻¹(A sin Ωt, AΩ cos Ωt)` with `A = √|τ| r₀`, `Ω = √δ ω₀`, sampled at
/// `t_i = i T / N` over one period.
pub fn cycle_curve(gamma_inv: &Mat<f64>, prediction: &KbmPrediction, sample_count: usize) -> Result<Vec<CyclePoint>> {
    let (Some(amp), Some(freq), Some(period)) = (prediction.z_amplitude, prediction.angular_frequency, prediction.period)
    else {
        return Err(Error::InvalidArgument("no predicted cycle to sample".into()));
    };
    if gamma_inv.shape() != (2, 2) {
        return Err(Error::shape("gamma_inverse", (2, 2), gamma_inv.shape()));
    }
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    Ok((0..sample_count)
        .map(|i| {
            let t = i as f64 * period / sample_count as f64;
            let (s, c) = (freq * t).sin_cos();
            let y = [amp * s, amp * freq * c];
            let x = gamma_inv.matvec(&y);
            CyclePoint { t, x1: x[0], x2: x[1] }
        })
        .collect())
}

/// Closed-form `max |x1|` of [`cycle_curve`].
pub fn predicted_x1_amplitude(gamma_inv: &Mat<f64>, prediction: &KbmPrediction) -> Option<f64> {
    let amp = prediction.z_amplitude?;
    let freq = prediction.angular_frequency?;
    Some(amp * gamma_inv[(0, 0)].hypot(gamma_inv[(0, 1)] * freq))
}
