mod common;

use approx::assert_relative_eq;
use common::{mixed_singular_values, random_block, random_problem, random_system, rel_diff, rng};
use nalgebra::DMatrix;
use parauzawa::linalg::{BlockVector, SaddleVector};
use parauzawa::model::{HeatProblem, Space, TimeGrid};
use parauzawa::operators::{dense_block_matrix, TimeGlobalSystem};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn k_and_b_adjoints(seed in any::<u64>()) {
        let sys = random_system(seed);
        let mut r = rng(seed ^ 1);
        let (u, v) = (random_block(&mut r, sys.steps(), sys.dim()), random_block(&mut r, sys.steps(), sys.dim()));
        let lhs = v.dot(&sys.apply_k(&u).unwrap());
        let rhs = u.dot(&sys.apply_kt(&v).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
        let lhs = v.dot(&sys.apply_b(&u).unwrap());
        let rhs = u.dot(&sys.apply_bt(&v).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
    }

    #[test]
    fn saddle_operator_is_symmetric(seed in any::<u64>()) {
        let sys = random_system(seed);
        let mut r = rng(seed ^ 2);
        let (n, d) = (sys.steps(), sys.dim());
        let w = SaddleVector::new(random_block(&mut r, n, d), random_block(&mut r, n, d)).unwrap();
        let z = SaddleVector::new(random_block(&mut r, n, d), random_block(&mut r, n, d)).unwrap();
        let lhs = w.dot(&sys.apply_saddle(&z).unwrap());
        let rhs = z.dot(&sys.apply_saddle(&w).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
    }

    #[test]
    fn s_form_matches_operator_and_is_positive(seed in any::<u64>()) {
        let sys = random_system(seed);
        let mut r = rng(seed ^ 3);
        let (u, v) = (random_block(&mut r, sys.steps(), sys.dim()), random_block(&mut r, sys.steps(), sys.dim()));
        let form = sys.s_form(&u, &v).unwrap();
        let op = u.dot(&sys.apply_s(&v).unwrap());
        prop_assert!((form - op).abs() <= 1e-11 * (1.0 + op.abs()));
        prop_assert!(sys.s_form(&u, &u).unwrap() > 0.0);
    }

    #[test]
    fn optimal_test_function_realizes_s_norm(seed in any::<u64>()) {
        let sys = random_system(seed);
        let mut r = rng(seed ^ 4);
        let u = random_block(&mut r, sys.steps(), sys.dim());
        let pu = sys.apply_p(&u).unwrap();
        prop_assert!(rel_diff(sys.a_norm(&pu).unwrap(), sys.s_norm(&u).unwrap()) <= 1e-10);
        // b(u, Pu) = ||u||_S^2
        let b = pu.dot(&sys.apply_b(&u).unwrap());
        prop_assert!(rel_diff(b, sys.s_norm(&u).unwrap().powi(2)) <= 1e-10);
    }

    #[test]
    fn jumps_are_bounded(seed in any::<u64>()) {
        let sys = random_system(seed);
        let mut r = rng(seed ^ 5);
        let v = random_block(&mut r, sys.steps(), sys.dim());
        let j = sys.jump_form(&v, &v).unwrap();
        let dual = sys.dual_form(&v, &v).unwrap();
        let energy = sys.a_norm(&v).unwrap().powi(2);
        prop_assert!(j >= 0.0);
        for eps in [0.5, 1.0, 2.0] {
            prop_assert!(j <= dual / eps + eps * energy + 1e-12 * j);
        }
    }

    #[test]
    fn s_d_is_equivalent_to_s(seed in any::<u64>()) {
        let sys = random_system(seed);
        let mut r = rng(seed ^ 6);
        let v = random_block(&mut r, sys.steps(), sys.dim());
        let s = sys.s_form(&v, &v).unwrap();
        let sd = sys.s_d_form(&v, &v).unwrap();
        prop_assert!(sd <= s * (1.0 + 1e-12));
        prop_assert!(s <= 3.0 * sd * (1.0 + 1e-12));
    }

    #[test]
    fn max_m_norm_is_bounded_by_s_norm(seed in any::<u64>()) {
        let sys = random_system(seed);
        let mut r = rng(seed ^ 7);
        let u = random_block(&mut r, sys.steps(), sys.dim());
        prop_assert!(sys.max_m_norm(&u).unwrap() <= sys.s_norm(&u).unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn mixed_inf_sup_constants() {
    let lo = (5f64.sqrt() - 1.0) / 2.0;
    let hi = (5f64.sqrt() + 1.0) / 2.0;
    let mut tested = 0;
    for seed in 0..200u64 {
        let spec = random_problem(seed);
        if spec.steps() > 8 || spec.dim() > 7 {
            continue;
        }
        let sys = TimeGlobalSystem::new(spec).with_exact_solvers().unwrap();
        for sv in mixed_singular_values(&sys) {
            assert!(sv >= lo - 1e-8 && sv <= hi + 1e-8, "seed {seed}: singular value {sv}");
        }
        tested += 1;
    }
    assert!(tested >= 10, "only {tested} small instances");
}

#[test]
fn scalar_s_matches_hand_computation() {
    // M = A = 1, tau = 1, N = 2: K = [[1,0],[-1,1]], S = K^T K + K + K^T + I
    let spec = HeatProblem::new(Space::OneD, 2, TimeGrid::uniform(2, 1.0).unwrap()).unwrap().build().unwrap();
    let sys = TimeGlobalSystem::new(spec).with_exact_solvers().unwrap();
    assert_eq!(sys.dim(), 1);
    let (m, a) = (1.0 / 3.0, 4.0); // P1 on two cells: M = 2h/3, A = 2/h with h = 1/2
    let tau = 0.5;
    let s = dense_block_matrix(2, 1, |x| sys.apply_s(x)).unwrap();
    let k = DMatrix::from_row_slice(2, 2, &[m, 0.0, -m, m]);
    let expected = k.transpose() * &k / (tau * a) + &k + k.transpose() + DMatrix::identity(2, 2) * (tau * a);
    for i in 0..2 {
        for j in 0..2 {
            assert_relative_eq!(s[(i, j)], expected[(i, j)], max_relative = 1e-13);
        }
    }
}

#[test]
fn max_norm_bound_on_many_vectors() {
    let mut r = rng(99);
    for i in 0..1000u64 {
        let sys = random_system(i % 10);
        let u: BlockVector = random_block(&mut r, sys.steps(), sys.dim());
        assert!(sys.max_m_norm(&u).unwrap() <= sys.s_norm(&u).unwrap() * (1.0 + 1e-12));
    }
}
