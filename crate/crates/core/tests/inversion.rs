mod common;

use common::{mixed, normal_form, q, quadratic, scaled_normal_form};
use hopf_kbm::change_of_vars::{solve_change_of_variables, ChangeOfVariables, SolveOptions};
use hopf_kbm::inversion::{composition_residual_slope, invert_to_cubic, reverse_composition_slope};
use hopf_kbm::scalar::Rational;
use hopf_kbm::system::PlanarPolySystem;

fn corpus() -> Vec<(&'static str, PlanarPolySystem<Rational>)> {
    vec![
        ("normal form", normal_form(q(1, 100))),
        ("time rescaled", scaled_normal_form(q(1, 100), 2)),
        ("reflected", scaled_normal_form(q(1, 100), -1)),
        ("quadratic", quadratic(q(1, 100))),
        ("mixed", mixed(q(1, 50))),
    ]
}

/// Solves `H(X) = Y` by Newton's method with a finite-difference Jacobian.
fn newton_inverse(cov: &ChangeOfVariables<f64>, y: [f64; 2]) -> [f64; 2] {
    let gi = cov.gamma_inverse().unwrap();
    let mut x = [gi[(0, 0)] * y[0] + gi[(0, 1)] * y[1], gi[(1, 0)] * y[0] + gi[(1, 1)] * y[1]];
    for _ in 0..50 {
        let h = cov.evaluate(&x);
        let r = [h[0] - y[0], h[1] - y[1]];
        if r[0].hypot(r[1]) < 1e-16 * y[0].hypot(y[1]) {
            break;
        }
        let e = 1e-7 * (1.0 + x[0].hypot(x[1]));
        let hu = cov.evaluate(&[x[0] + e, x[1]]);
        let hv = cov.evaluate(&[x[0], x[1] + e]);
        let j = [[(hu[0] - h[0]) / e, (hv[0] - h[0]) / e], [(hu[1] - h[1]) / e, (hv[1] - h[1]) / e]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        x[0] -= (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        x[1] -= (j[0][0] * r[1] - j[1][0] * r[0]) / det;
    }
    x
}

#[test]
fn composition_residual_is_fourth_order_across_the_corpus() {
    for (name, sys) in corpus() {
        let cov = solve_change_of_variables(&sys, &SolveOptions::default()).unwrap().cov;
        let inv = invert_to_cubic(&cov).unwrap();
        let forward = composition_residual_slope(&cov, &inv);
        let reverse = reverse_composition_slope(&cov, &inv);
        assert!(forward.at_least(3.8), "{name}: forward {:?}", forward.slope);
        assert!(reverse.at_least(3.8), "{name}: reverse {:?}", reverse.slope);

        let covf = cov.to_f64();
        let invf = inv.to_f64();
        let forward = composition_residual_slope(&covf, &invf);
        assert!(forward.at_least(3.8), "{name}: float forward {:?}", forward.slope);
    }
}

#[test]
fn truncated_inverse_matches_newton_to_fourth_order() {
    for (name, sys) in corpus() {
        let cov = solve_change_of_variables(&sys.to_f64(), &SolveOptions::default()).unwrap().cov;
        let inv = invert_to_cubic(&cov).unwrap();
        let mut pts = Vec::new();
        for r in [0.08, 0.04, 0.02, 0.01] {
            let mut worst: f64 = 0.0;
            for i in 0..12 {
                let th = 0.3 + i as f64 * std::f64::consts::TAU / 12.0;
                let y = [r * th.cos(), r * th.sin()];
                let exact = newton_inverse(&cov, y);
                let approx = inv.evaluate(&y);
                worst = worst.max((exact[0] - approx[0]).hypot(exact[1] - approx[1]));
            }
            pts.push((r, worst));
        }
        if pts.iter().all(|p| p.1 < 1e-14) {
            continue;
        }
        let slope = common::loglog_slope(&pts);
        assert!(slope >= 3.8, "{name}: slope {slope}, {pts:?}");
    }
}
