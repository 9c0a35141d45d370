mod common;

use common::{mixed, normal_form, q, qi, quadratic};
use hopf_kbm::change_of_vars::{
    assemble_constraints, equation_count, min_degree_bound, psi_phi_residual, reduction_residual,
    solve_change_of_variables, unknown_count, GammaParams, SolveOptions,
};
use hopf_kbm::error::Error;
use hopf_kbm::matrix::{Mat, Solver};
use hopf_kbm::scalar::Rational;
use hopf_kbm::system::PlanarPolySystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_system(rng: &mut ChaCha8Rng, n: usize) -> PlanarPolySystem<Rational> {
    let small = |rng: &mut ChaCha8Rng| q(rng.gen_range(-4..=4), rng.gen_range(1..=3));
    let jac = Mat::from_fn(2, 2, |_, _| small(rng));
    let phi = (2..=n)
        .map(|k| {
            let mut m = Mat::from_fn(2, k + 1, |_, _| small(rng));
            if k == n {
                m[(0, 0)] = qi(1);
            }
            m
        })
        .collect();
    PlanarPolySystem::build(jac, phi).unwrap()
}

#[test]
fn constraint_matrix_has_the_counted_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=6 {
        let sys = random_system(&mut rng, n);
        for m in 2..=8 {
            let cs = assemble_constraints(&sys, m, &GammaParams::Free).unwrap();
            assert_eq!(cs.unknowns(), unknown_count(m), "n={n} m={m}");
            assert_eq!(cs.equations(), equation_count(m, n), "n={n} m={m}");
        }
    }
}

#[test]
fn degree_bound_leaves_a_nontrivial_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 2..=6 {
        let m = min_degree_bound(n).unwrap();
        assert!(unknown_count(m) > equation_count(m, n), "n={n}");
        if m > 2 {
            assert!(unknown_count(m - 1) <= equation_count(m - 1, n), "bound not minimal for n={n}");
        }
        let sys = random_system(&mut rng, n).to_f64();
        let cs = assemble_constraints(&sys, m, &GammaParams::Free).unwrap();
        let rank = <f64 as Solver>::rank(&cs.matrix);
        assert!(cs.unknowns() - rank >= 1, "n={n} m={m} rank={rank}");
    }
}

#[test]
fn exact_solutions_certify_the_reduction() {
    for (name, sys) in [
        ("quadratic", quadratic(q(1, 100))),
        ("normal form", normal_form(q(1, 100))),
        ("mixed", mixed(q(1, 50))),
    ] {
        let solved = solve_change_of_variables(&sys, &SolveOptions::default()).unwrap();
        assert_eq!(reduction_residual(&solved.cov, &sys), 0.0, "{name}");
        assert_eq!(psi_phi_residual(&solved.cov, &sys), 0.0, "{name}");
    }
}

#[test]
fn float_solutions_satisfy_the_reduction_to_rounding() {
    for (name, sys) in [
        ("quadratic", quadratic(q(1, 100))),
        ("normal form", normal_form(q(1, 100))),
        ("mixed", mixed(q(1, 50))),
    ] {
        let sys = sys.to_f64();
        let solved = solve_change_of_variables(&sys, &SolveOptions::default()).unwrap();
        let res = reduction_residual(&solved.cov, &sys);
        assert!(res < 1e-10, "{name}: {res:e}");
    }
}

#[test]
fn random_cubic_systems_admit_a_change_of_variables() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..6 {
        let sys = random_system(&mut rng, 3);
        let solved = solve_change_of_variables(&sys, &SolveOptions::default()).unwrap();
        assert_eq!(reduction_residual(&solved.cov, &sys), 0.0);
    }
}

#[test]
fn identity_jacobian_has_no_solution() {
    let sys = PlanarPolySystem::<Rational>::build(
        Mat::from_i64(&[&[1, 0], &[0, 1]]),
        vec![Mat::from_i64(&[&[1, 0, 0], &[0, 0, 1]])],
    )
    .unwrap();
    match solve_change_of_variables(&sys, &SolveOptions::default()) {
        Err(Error::NoSolution(report)) => {
            assert_eq!(report.unknowns, unknown_count(report.m));
            assert_eq!(report.equations, equation_count(report.m, 2));
        }
        other => panic!("expected NoSolution, got {other:?}"),
    }
}
