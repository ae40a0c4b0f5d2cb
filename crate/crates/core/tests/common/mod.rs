#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use parauzawa::dst::{frequency_weight, sine};
use parauzawa::experiments::{build_preconditioners, preconditioned_spectrum, spectrum_lanczos_options};
use parauzawa::linalg::{BlockVector, SaddleVector};
use parauzawa::model::{Coefficient, HeatData, HeatProblem, ProblemSpec, Space, TimeGrid};
use parauzawa::operators::{dense_block_matrix, TimeGlobalSystem};
use parauzawa::solvers::{minres_solve, sequential_euler_solve, uzawa_solve, Stopping, UzawaConfig};
use parauzawa::spatial::{hierarchy_for, SolverKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_block(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> BlockVector {
    BlockVector::from_fn(steps, dim, |_, _| rng.gen_range(-1.0..1.0))
}

/// A small heat problem drawn from the seed: 1D or 2D, uniform or perturbed
/// steps, constant or time-varying coefficient, random data.
pub fn random_problem(seed: u64) -> ProblemSpec {
    let mut r = rng(seed);
    let space = if r.gen_bool(0.5) { Space::OneD } else { Space::TwoD };
    let cells = match space {
        Space::OneD => [4, 6, 8, 16][r.gen_range(0..4)],
        Space::TwoD => [4, 8][r.gen_range(0..2)],
    };
    let steps = r.gen_range(1..=24);
    let final_time = r.gen_range(0.1..2.0);
    let grid = if r.gen_bool(0.5) {
        TimeGrid::uniform(steps, final_time).unwrap()
    } else {
        TimeGrid::perturbed(steps, final_time, r.gen_range(0.1..0.6), r.gen()).unwrap()
    };
    let coefficient = match r.gen_range(0..3) {
        0 => Coefficient::Constant(r.gen_range(0.5..2.0)),
        1 => Coefficient::Step { before: r.gen_range(0.5..3.0), after: r.gen_range(0.5..3.0), switch_time: final_time / 2.0 },
        _ => Coefficient::Sinusoidal { mean: 1.5, amplitude: r.gen_range(0.0..1.0), frequency: r.gen_range(0.5..3.0) },
    };
    HeatProblem::new(space, cells, grid)
        .unwrap()
        .coefficient(coefficient)
        .data(HeatData::Random { seed: r.gen() })
        .build()
        .unwrap()
}

pub fn random_system(seed: u64) -> TimeGlobalSystem {
    TimeGlobalSystem::new(random_problem(seed)).with_exact_solvers().unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Random SPD matrix `Q^T Q + shift I` with entries of `Q` in `[-1, 1]`.
pub fn random_spd(rng: &mut ChaCha8Rng, dim: usize, shift: f64) -> nalgebra::DMatrix<f64> {
    let q = nalgebra::DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    q.transpose() * q + nalgebra::DMatrix::identity(dim, dim) * shift
}

/// Extremal eigenvalues of `H^{-1} S` for the 1D heat problem on `cells`
/// uniform cells, `T = 1`, `N` uniform steps, built independently of the
/// library from the closed-form eigenpairs of the P1 pencil `(A, M)`:
/// `lambda_j = (6 / h^2) (1 - cos(j pi h)) / (2 + cos(j pi h))`.
///
/// In that basis every spatial mode decouples into an `N x N` problem with
/// `S_j = K^T K / (tau l) + K + K^T + tau l I` and
/// `H_j = Phi^T diag((N / 2 tau) (mu_k + tau l)^2 / l) Phi`.
pub fn table1_oracle(cells: usize, n: usize) -> (f64, f64) {
    use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
    use std::f64::consts::PI;
    let h = 1.0 / cells as f64;
    let tau = 1.0 / n as f64;
    let nf = n as f64;
    let phi = DMatrix::from_fn(n, n, |k, m| {
        let (k, m) = (k + 1, m + 1);
        let w = if m == n { 0.5 } else { 1.0 };
        2.0 / nf * w * ((2 * k - 1) as f64 * m as f64 * PI / (2.0 * nf)).sin()
    });
    let mu: Vec<f64> = (1..=n).map(|k| 2.0 * ((2 * k - 1) as f64 * PI / (4.0 * nf)).sin()).collect();
    let k_mat = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else if i == j + 1 { -1.0 } else { 0.0 });
    let ktk = k_mat.transpose() * &k_mat;
    let ksym = &k_mat + k_mat.transpose();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 1..cells {
        let c = (j as f64 * PI * h).cos();
        let l = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
        let tl = tau * l;
        let s = &ktk / tl + &ksym + DMatrix::identity(n, n) * tl;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            mu.iter().map(|m| nf / (2.0 * tau) * (m + tl).powi(2) / l),
        ));
        let hm = phi.transpose() * d * &phi;
        let hm = (&hm + hm.transpose()) * 0.5;
        let chol = Cholesky::new(hm).expect("H is SPD");
        let linv = chol.l().try_inverse().expect("invertible");
        let c = &linv * s * linv.transpose();
        let e = SymmetricEigen::new((&c + c.transpose()) * 0.5);
        lo = lo.min(e.eigenvalues.min());
        hi = hi.max(e.eigenvalues.max());
    }
    (lo, hi)
}

/// Singular values of `D^{-1/2} Saddle D^{-1/2}` with `D = diag(A, S)`.
pub fn mixed_singular_values(sys: &TimeGlobalSystem) -> Vec<f64> {
    let (n, d) = (sys.steps(), sys.dim());
    let size = n * d;
    let a = dense_block_matrix(n, d, |x| sys.apply_abd(x)).unwrap();
    let s = dense_block_matrix(n, d, |x| sys.apply_s(x)).unwrap();
    let mut saddle = DMatrix::zeros(2 * size, 2 * size);
    for col in 0..2 * size {
        let mut e = SaddleVector::zeros(n, d);
        if col < size {
            e.p.as_mut_slice()[col] = 1.0;
        } else {
            e.u.as_mut_slice()[col - size] = 1.0;
        }
        let y = sys.apply_saddle(&e).unwrap();
        for row in 0..size {
            saddle[(row, col)] = y.p.as_slice()[row];
            saddle[(size + row, col)] = y.u.as_slice()[row];
        }
    }
    let inv_sqrt = |m: DMatrix<f64>| {
        let e = SymmetricEigen::new((&m + m.transpose()) * 0.5);
        let dvals = e.eigenvalues.map(|x| 1.0 / x.sqrt());
        &e.eigenvectors * DMatrix::from_diagonal(&dvals) * e.eigenvectors.transpose()
    };
    let mut dinv = DMatrix::zeros(2 * size, 2 * size);
    dinv.view_mut((0, 0), (size, size)).copy_from(&inv_sqrt(a));
    dinv.view_mut((size, size), (size, size)).copy_from(&inv_sqrt(s));
    let scaled = &dinv * saddle * &dinv;
    SymmetricEigen::new((&scaled + scaled.transpose()) * 0.5).eigenvalues.iter().map(|x| x.abs()).collect()
}

/// Weighted orthogonality of the sine basis and of its differences,
/// normalized by `N`.
pub fn orthogonality_defect(n: usize) -> f64 {
    // phi[k][m] for m = 0..=N with phi_k^0 = 0
    let phi: Vec<Vec<f64>> = (1..=n).map(|k| (0..=n).map(|m| if m == 0 { 0.0 } else { sine(k, m, n) }).collect()).collect();
    let diff: Vec<Vec<f64>> = phi.iter().map(|p| (1..=n).map(|m| p[m] - p[m - 1]).collect()).collect();
    let weighted: Vec<Vec<f64>> = phi.iter().map(|p| (1..=n).map(|m| if m == n { 0.5 * p[m] } else { p[m] }).collect()).collect();
    let mut worst = 0.0f64;
    for k in 0..n {
        for j in 0..n {
            let w: f64 = weighted[k].iter().zip(&phi[j][1..]).map(|(a, b)| a * b).sum();
            let d: f64 = diff[k].iter().zip(&diff[j]).map(|(a, b)| a * b).sum();
            let (ew, ed) = if k == j { (n as f64 / 2.0, n as f64 / 2.0 * frequency_weight(k + 1, n).powi(2)) } else { (0.0, 0.0) };
            worst = worst.max((w - ew).abs() / n as f64).max((d - ed).abs() / n as f64);
        }
    }
    worst
}

pub fn kind_for(spec: &ProblemSpec, seed: u64) -> SolverKind {
    match (seed % 3, hierarchy_for(spec).unwrap().is_some()) {
        (1, true) => SolverKind::mg(1),
        (2, _) => SolverKind::Jacobi { sweeps: 4, damping: 0.6 },
        _ => SolverKind::Direct,
    }
}

/// Relative S-norm distance of Uzawa and MINRES solutions from the
/// sequential sweep.
pub fn oracle_errors(seed: u64) -> (f64, f64) {
    let spec = random_problem(seed);
    let sys = TimeGlobalSystem::new(spec.clone()).with_exact_solvers().unwrap();
    let kind = kind_for(&spec, seed);
    let pc = build_preconditioners(&spec, kind).unwrap();
    let reference = sequential_euler_solve(&spec).unwrap();
    let norm = sys.s_norm(&reference).unwrap();

    // omega below 1 / lambda_max keeps the damping condition for small rho_A;
    // weak Jacobi blocks in 2D give kappa near 10^3, hence the long budget
    let spectrum = preconditioned_spectrum(&sys, &pc.h_tilde, 600, &spectrum_lanczos_options()).unwrap();
    let cfg = UzawaConfig { omega: 1.0 / spectrum.lambda_max, tol: 1e-13, max_iter: 100_000, record_history: false, ..Default::default() };
    let uz = uzawa_solve(&sys, &pc.a_tilde, &pc.h_tilde, &cfg, None).unwrap();
    assert!(uz.converged, "seed {seed}: Uzawa stopped after {}", uz.iterations);
    let mr = minres_solve(&sys, &pc.a_tilde, &pc.h_tilde, 1e-13, 100_000, Stopping::PreconditionedResidual).unwrap();
    assert!(mr.converged, "seed {seed}: MINRES stopped after {}", mr.iterations);
    (
        sys.s_norm(&uz.solution.u.sub(&reference)).unwrap() / norm,
        sys.s_norm(&mr.solution.u.sub(&reference)).unwrap() / norm,
    )
}

