#![allow(dead_code)]

use hopf_kbm::matrix::Mat;
use hopf_kbm::scalar::{Rational, Scalar};
use hopf_kbm::system::PlanarPolySystem;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn qi(v: i64) -> Rational {
    Rational::from_i64(v)
}

/// `x' = αx - y - x r²`, `y' = x + αy - y r²`, sped up by `s` (reversed for `s < 0`).
pub fn scaled_normal_form(alpha: Rational, s: i64) -> PlanarPolySystem<Rational> {
    let s = qi(s);
    PlanarPolySystem::build(
        Mat::from_rows(vec![vec![alpha.clone(), qi(-1)], vec![qi(1), alpha]]),
        vec![Mat::zeros(2, 3), Mat::from_i64(&[&[-1, 0, -1, 0], &[0, -1, 0, -1]])],
    )
    .unwrap()
    .time_scaled(&s)
}

pub fn normal_form(alpha: Rational) -> PlanarPolySystem<Rational> {
    scaled_normal_form(alpha, 1)
}

/// `x' = αx - y + x²`, `y' = x`.
pub fn quadratic(alpha: Rational) -> PlanarPolySystem<Rational> {
    PlanarPolySystem::build(
        Mat::from_rows(vec![vec![alpha, qi(-1)], vec![qi(1), qi(0)]]),
        vec![Mat::from_i64(&[&[1, 0, 0], &[0, 0, 0]])],
    )
    .unwrap()
}

/// The normal form plus `(x², xy)`.
pub fn mixed(alpha: Rational) -> PlanarPolySystem<Rational> {
    PlanarPolySystem::build(
        Mat::from_rows(vec![vec![alpha.clone(), qi(-1)], vec![qi(1), alpha]]),
        vec![Mat::from_i64(&[&[1, 0, 0], &[0, 1, 0]]), Mat::from_i64(&[&[-1, 0, -1, 0], &[0, -1, 0, -1]])],
    )
    .unwrap()
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // split first so the periodic integrand cannot fool the initial estimate
    let n = 8;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / n as f64, 40)
        })
        .sum()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
