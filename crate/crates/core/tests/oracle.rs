mod common;

use std::f64::consts::PI;

use common::{loglog_slope, normal_form, q, scaled_normal_form};
use hopf_kbm::kbm::{predict_cycle, Variant};
use hopf_kbm::oracle::{
    compare, integrate, measure_cycle, Controls, CycleMeasurement, MeasureOptions, Method, Section, Tolerances,
    Verdict,
};

/// `r² = α / (1 + (α/r₀² - 1) e^{-2αt})`, angle `t`, for the normal form from `(r₀, 0)`.
fn normal_form_exact(alpha: f64, r0: f64, t: f64) -> [f64; 2] {
    let r = (alpha / (1.0 + (alpha / (r0 * r0) - 1.0) * (-2.0 * alpha * t).exp())).sqrt();
    [r * t.cos(), r * t.sin()]
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[test]
fn rk4_is_fourth_order() {
    let sys = normal_form(q(1, 4)).to_f64();
    let (r0, t_end) = (1.0, 2.0);
    let exact = normal_form_exact(0.25, r0, t_end);
    let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&h| {
            let controls = Controls { method: Method::Rk4 { step: h }, ..Controls::default() };
            let traj = integrate(&sys, [r0, 0.0], t_end, &controls).unwrap();
            (h, distance(traj.last(), exact))
        })
        .collect();
    let slope = loglog_slope(&pts);
    assert!((3.9..=4.1).contains(&slope), "slope {slope}, {pts:?}");
}

#[test]
fn adaptive_integration_matches_the_closed_form() {
    let sys = normal_form(q(1, 25)).to_f64();
    for r0 in [0.05, 0.2, 0.6] {
        let traj = integrate(&sys, [r0, 0.0], 20.0, &Controls::default()).unwrap();
        assert!(!traj.blew_up);
        for (t, x) in traj.times.iter().zip(&traj.states).step_by(7) {
            let err = distance(*x, normal_form_exact(0.04, r0, *t));
            assert!(err < 1e-8, "r0 {r0} t {t}: {err:e}");
        }
    }
}

#[test]
fn normal_form_cycles_have_radius_sqrt_alpha() {
    for n in [1, 4, 9] {
        let alpha = n as f64 / 100.0;
        let sys = normal_form(q(n, 100)).to_f64();
        let m = measure_cycle(&sys, 0.8 * alpha.sqrt(), &MeasureOptions::default()).unwrap().unwrap();
        let exact = alpha.sqrt();
        assert!((m.amplitude - exact).abs() < 1e-3 * exact, "alpha {alpha}: {}", m.amplitude);
        assert!((m.radius_rms - exact).abs() < 1e-3 * exact);
        assert!((m.period - 2.0 * PI).abs() < 1e-6);
        assert!(m.stable && m.isolated);
        assert!(m.convergence_rate.abs() < 1.0);
    }
}

#[test]
fn seeds_on_both_sides_find_the_same_cycle() {
    let sys = normal_form(q(1, 25)).to_f64();
    let inside = measure_cycle(&sys, 0.1, &MeasureOptions::default()).unwrap().unwrap();
    let outside = measure_cycle(&sys, 0.4, &MeasureOptions::default()).unwrap().unwrap();
    assert!((inside.crossing - outside.crossing).abs() < 1e-7);
    assert!((inside.crossing - 0.2).abs() < 1e-6);
}

#[test]
fn time_rescaled_cycle_has_half_the_period() {
    let sys = scaled_normal_form(q(1, 100), 2).to_f64();
    let m = measure_cycle(&sys, 0.08, &MeasureOptions::default()).unwrap().unwrap();
    assert!((m.period - PI).abs() < 1e-6, "{}", m.period);
    assert!((m.amplitude - 0.1).abs() < 1e-4);
}

#[test]
fn reflected_cycle_is_unstable() {
    let sys = scaled_normal_form(q(1, 100), -1).to_f64();
    let m = measure_cycle(&sys, 0.08, &MeasureOptions::default()).unwrap().unwrap();
    assert!(!m.stable);
    assert!(m.convergence_rate > 1.0);
    assert!((m.amplitude - 0.1).abs() < 1e-4);
}

fn measurement(amplitude: f64, period: f64, stable: bool, isolated: bool) -> CycleMeasurement {
    CycleMeasurement {
        amplitude,
        radius_rms: amplitude,
        period,
        stable,
        convergence_rate: if stable { 0.5 } else { 2.0 },
        isolated,
        section: Section::PositiveX1,
        crossing: amplitude,
        return_map_evaluations: 10,
        orbit: Vec::new(),
    }
}

#[test]
fn comparison_verdicts() {
    let tol = Tolerances::default();
    let exists = predict_cycle(0.02, 1.0, 1.0, 0.0, Variant::default()).unwrap();
    let period = exists.period.unwrap();

    let ok = compare(&exists, Some(0.1), Some(&measurement(0.102, period, true, true)), tol);
    assert_eq!(ok.verdict, Verdict::Agreement);
    assert!(ok.passed);

    let far = compare(&exists, Some(0.1), Some(&measurement(0.2, period, true, true)), tol);
    assert_eq!(far.verdict, Verdict::Disagreement);
    assert!(!far.passed);

    let wrong_stability = compare(&exists, Some(0.1), Some(&measurement(0.1, period, false, true)), tol);
    assert_eq!(wrong_stability.verdict, Verdict::Disagreement);

    let missing = compare(&exists, Some(0.1), None, tol);
    assert_eq!(missing.verdict, Verdict::Disagreement);

    let none = predict_cycle(-0.02, 1.0, 1.0, 0.0, Variant::default()).unwrap();
    assert!(!none.exists);
    assert_eq!(compare(&none, None, None, tol).verdict, Verdict::Agreement);

    let flat = predict_cycle(0.0, 1.0, 0.0, 0.0, Variant::default()).unwrap();
    assert_eq!(compare(&flat, None, None, tol).verdict, Verdict::Degenerate);
    assert_eq!(compare(&flat, None, Some(&measurement(0.1, 2.0 * PI, true, false)), tol).verdict, Verdict::Degenerate);
    assert_eq!(compare(&flat, None, Some(&measurement(0.1, 2.0 * PI, true, true)), tol).verdict, Verdict::Inconclusive);
}
