mod common;

use std::sync::Arc;

use common::{kind_for, oracle_errors, random_problem};
use parauzawa::experiments::{build_preconditioners, preconditioned_spectrum, run_history, spectrum_lanczos_options};
use parauzawa::linalg::LanczosOptions;
use parauzawa::model::{HeatData, HeatProblem, ProblemSpec, Space, TimeGrid};
use parauzawa::operators::TimeGlobalSystem;
use parauzawa::solvers::{
    compute_rate_report, minres_solve, sequential_euler_solve, uzawa_solve, Stopping, UzawaConfig,
};
use parauzawa::spatial::{estimate_rho_a, SolverKind};
use parauzawa::Error;

#[test]
fn outer_solvers_match_sequential_sweep() {
    for seed in 100..110u64 {
        let (uz, mr) = oracle_errors(seed);
        assert!(uz < 1e-8 && mr < 1e-8, "seed {seed}: uzawa {uz:e}, minres {mr:e}");
    }
}

#[test]
fn auxiliary_variable_is_minus_u() {
    let spec = random_problem(7);
    let sys = TimeGlobalSystem::new(spec.clone()).with_exact_solvers().unwrap();
    let pc = build_preconditioners(&spec, SolverKind::Direct).unwrap();
    let out = minres_solve(&sys, &pc.a_tilde, &pc.h_tilde, 1e-13, 1000, Stopping::PreconditionedResidual).unwrap();
    let sum = out.solution.p.add(&out.solution.u);
    assert!(sum.norm() <= 1e-9 * out.solution.u.norm());
}

fn one_d(cells: usize, steps: usize) -> ProblemSpec {
    HeatProblem::new(Space::OneD, cells, TimeGrid::uniform(steps, 1.0).unwrap())
        .unwrap()
        .data(HeatData::Random { seed: 5 })
        .build()
        .unwrap()
}

#[test]
fn d_norm_contracts_at_the_predicted_rate() {
    for (cells, steps) in [(2, 1), (2, 6), (16, 8), (32, 24)] {
        let spec = one_d(cells, steps);
        let sys = TimeGlobalSystem::new(spec.clone()).with_exact_solvers().unwrap();
        let pc = build_preconditioners(&spec, SolverKind::Direct).unwrap();
        let s = preconditioned_spectrum(&sys, &pc.h_tilde, 1024, &spectrum_lanczos_options()).unwrap();
        for omega in [0.5, 0.9] {
            let rate = compute_rate_report(0.0, omega, s.lambda_min, s.lambda_max).unwrap();
            assert!(rate.damping_ok && rate.rho_u < 1.0);
            // stop well above the rounding floor of the sequential reference
            let cfg = UzawaConfig {
                omega,
                tol: 1e-6,
                max_iter: 60,
                stopping: Stopping::SNormError,
                d_norm_rho: Some(0.0),
                ..Default::default()
            };
            let out = uzawa_solve(&sys, &pc.a_tilde, &pc.h_tilde, &cfg, None).unwrap();
            let ratios = out.history.d_norm_ratios();
            assert!(!ratios.is_empty());
            for (j, q) in ratios.iter().enumerate() {
                assert!(*q <= rate.rho_u * (1.0 + 1e-8), "1D/{cells} N={steps} omega={omega} step {j}: {q} > {}", rate.rho_u);
            }
        }
    }
}

#[test]
fn d_norm_contracts_with_multigrid_blocks() {
    let spec = one_d(32, 16);
    let sys = TimeGlobalSystem::new(spec.clone()).with_exact_solvers().unwrap();
    let pc = build_preconditioners(&spec, SolverKind::mg(1)).unwrap();
    let (solver, _) = pc.a_tilde.step(0);
    let opts = LanczosOptions { max_iter: 31, tol: 0.0, seed: 1 };
    let rho = estimate_rho_a(&spec.stiffness()[0].assembled(), solver, &opts).unwrap();
    let s = preconditioned_spectrum(&sys, &pc.h_tilde, 1024, &spectrum_lanczos_options()).unwrap();
    let omega = 0.9;
    let rate = compute_rate_report(rho, omega, s.lambda_min, s.lambda_max).unwrap();
    let cfg = UzawaConfig { omega, tol: 1e-6, max_iter: 200, stopping: Stopping::SNormError, d_norm_rho: Some(rho), ..Default::default() };
    let out = uzawa_solve(&sys, &pc.a_tilde, &pc.h_tilde, &cfg, None).unwrap();
    assert!(out.converged, "{} iterations, rho {rho}, {rate:?}", out.iterations);
    if rate.damping_ok {
        // rho is estimated from below, so allow a small margin over the bound
        for q in out.history.d_norm_ratios() {
            assert!(q <= rate.rho_u * (1.0 + 1e-3), "{q} > {}", rate.rho_u);
        }
    }
}

#[test]
fn omega_sweep_follows_damping_condition() {
    let spec = one_d(16, 16);
    let sys = TimeGlobalSystem::new(spec.clone()).with_exact_solvers().unwrap();
    let pc = build_preconditioners(&spec, SolverKind::Direct).unwrap();
    let s = preconditioned_spectrum(&sys, &pc.h_tilde, 1024, &spectrum_lanczos_options()).unwrap();
    let mut last = usize::MAX;
    for omega in [0.2, 0.4, 0.6, 0.8] {
        let cfg = UzawaConfig { omega, tol: 1e-8, max_iter: 1000, ..Default::default() };
        let out = uzawa_solve(&sys, &pc.a_tilde, &pc.h_tilde, &cfg, None).unwrap();
        assert!(out.converged);
        // below 1 / lambda_max, larger damping is never slower
        assert!(out.iterations <= last, "omega {omega}");
        last = out.iterations;
    }
    let omega = 2.2 / s.lambda_max;
    let cfg = UzawaConfig { omega, tol: 1e-8, max_iter: 2000, ..Default::default() };
    assert!(matches!(uzawa_solve(&sys, &pc.a_tilde, &pc.h_tilde, &cfg, None), Err(Error::Diverged { .. })));
}

#[test]
fn minres_residuals_never_increase() {
    for seed in [3u64, 11, 19] {
        let spec = random_problem(seed);
        let sys = TimeGlobalSystem::new(spec.clone()).with_exact_solvers().unwrap();
        let pc = build_preconditioners(&spec, kind_for(&spec, seed)).unwrap();
        let out = minres_solve(&sys, &pc.a_tilde, &pc.h_tilde, 1e-10, 2000, Stopping::PreconditionedResidual).unwrap();
        let res: Vec<f64> = out.history.rows.iter().filter_map(|r| r.residual).collect();
        for w in res.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10), "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn s_norm_stopping_uses_given_reference() {
    let spec = one_d(8, 8);
    let sys = TimeGlobalSystem::new(spec.clone()).with_exact_solvers().unwrap();
    let pc = build_preconditioners(&spec, SolverKind::Direct).unwrap();
    let reference = Arc::new(sequential_euler_solve(&spec).unwrap());
    let cfg = UzawaConfig { stopping: Stopping::SNormError, reference: Some(reference.clone()), ..Default::default() };
    let out = uzawa_solve(&sys, &pc.a_tilde, &pc.h_tilde, &cfg, None).unwrap();
    let err = sys.s_norm(&out.solution.u.sub(&reference)).unwrap() / sys.s_norm(&reference).unwrap();
    assert!(out.converged && err <= 1e-6);
    let last = out.history.rows.last().unwrap().s_norm_error.unwrap();
    assert!((last - err).abs() <= 1e-12);
}

#[test]
fn s_norm_stopping_needs_exact_solvers() {
    let spec = one_d(8, 4);
    let sys = TimeGlobalSystem::new(spec.clone());
    let pc = build_preconditioners(&spec, SolverKind::Direct).unwrap();
    let cfg = UzawaConfig { stopping: Stopping::SNormError, ..Default::default() };
    assert_eq!(uzawa_solve(&sys, &pc.a_tilde, &pc.h_tilde, &cfg, None).unwrap_err(), Error::DiagnosticModeRequired);
}

#[test]
fn history_curves_are_close_across_spatial_solvers() {
    let kinds = [SolverKind::Direct, SolverKind::mg(1), SolverKind::mg(2)];
    let curves = run_history(1.0 / 16.0, 64, &kinds, 0.9, 1e-6).unwrap();
    let counts: Vec<usize> = curves.iter().map(|c| c.iterations).collect();
    assert!(curves.iter().all(|c| c.converged));
    assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 5, "{counts:?}");
    assert!(counts.iter().all(|&c| c <= 30), "{counts:?}");
    let direct: Vec<f64> = curves[0].history.rows.iter().filter_map(|r| r.s_norm_error).collect();
    for w in direct[2..].windows(2) {
        assert!(w[1] < w[0]);
    }
    let (one, two) = (&curves[1].history.rows, &curves[2].history.rows);
    for (a, b) in one.iter().zip(two) {
        let (a, b) = (a.s_norm_error.unwrap(), b.s_norm_error.unwrap());
        assert!(b <= a * 1.5 + 1e-12, "mg(2) {b} vs mg(1) {a}");
    }
}
