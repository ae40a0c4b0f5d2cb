//! The Schur complement preconditioner `H = Phi^T H_hat Phi`.
//!
//! `H_hat` is block diagonal with blocks `(N / 2 tau) H_k A^{-1} H_k`, where
//! `H_k = mu_k M + tau A` for the reference pair `(tau, A)`. Inverting `H`
//! costs two sine transforms and, per frequency `k`, two spatial solves with
//! `H_k` around one multiplication by `A`. The `N` frequency blocks are
//! independent.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::dst::{frequency_weight, DstPlan};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{BlockVector, CholeskyFactor, SpatialMatrix};
use crate::model::ProblemSpec;
use crate::spatial::{MgHierarchy, SolverKind, SpatialSolver};

/// Cumulative wall time spent in transforms and in spatial work.
#[derive(Debug, Default)]
pub struct Timings {
    fft_nanos: AtomicU64,
    spatial_nanos: AtomicU64,
}

impl Timings {
    pub fn fft_seconds(&self) -> f64 {
        self.fft_nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }

    pub fn spatial_seconds(&self) -> f64 {
        self.spatial_nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }

    fn add(counter: &AtomicU64, since: Instant) {
        counter.fetch_add(since.elapsed().as_nanos() as u64, Ordering::Relaxed);
    }
}

#[derive(Debug)]
pub struct SchurPreconditioner {
    steps: usize,
    tau: f64,
    mass: Arc<SpatialMatrix>,
    /// Assembled reference operator `A`.
    a_ref: SpatialMatrix,
    mu: Vec<f64>,
    solvers: Vec<SpatialSolver>,
    plan: DstPlan,
    kind: SolverKind,
    a_ref_factor: Option<CholeskyFactor>,
    timings: Timings,
}

impl SchurPreconditioner {
    /// Builds `H` (direct solvers) or `H~` (approximate solvers) from the
    /// reference pair of `spec`. Multigrid needs `hierarchy`.
    pub fn build(spec: &ProblemSpec, kind: SolverKind, hierarchy: Option<&Arc<MgHierarchy>>) -> Result<Self> {
        let steps = spec.steps();
        let tau = spec.tau_ref();
        let a = spec.a_ref();
        let mu: Vec<f64> = (1..=steps).map(|k| frequency_weight(k, steps)).collect();
        let c_stiff = tau * a.scale;
        let solvers = mu
            .par_iter()
            .map(|&m| SpatialSolver::build(kind, spec.mass(), &a.base, m, c_stiff, hierarchy))
            .collect::<Result<Vec<_>>>()?;
        let a_ref = a.assembled();
        let a_ref_factor = if kind.is_direct() { Some(CholeskyFactor::new(&a_ref)?) } else { None };
        Ok(Self {
            steps,
            tau,
            mass: spec.mass().clone(),
            a_ref,
            mu,
            solvers,
            plan: DstPlan::new(steps)?,
            kind,
            a_ref_factor,
            timings: Timings::default(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    /// `mu_1, ..., mu_N`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn a_ref(&self) -> &SpatialMatrix {
        &self.a_ref
    }

    pub fn solver(&self, k: usize) -> &SpatialSolver {
        &self.solvers[k]
    }

    pub fn plan(&self) -> &DstPlan {
        &self.plan
    }

    pub fn timings(&self) -> &Timings {
        &self.timings
    }

    /// `H_k = mu_k M + tau A` for zero-based `k`.
    pub fn h_k(&self, k: usize) -> Result<SpatialMatrix> {
        self.mass.linear_combination(self.mu[k], &self.a_ref, self.tau)
    }

    fn check(&self, r: &BlockVector) -> Result<()> {
        check_dim(self.steps, r.steps())?;
        check_dim(self.dim(), r.dim())
    }

    /// `Phi^{-1} H_hat^{-1} Phi^{-T} r` with block `k` of `H_hat^{-1}`
    /// applied as `(2 tau / N) W_k^{-1} A W_k^{-1}`.
    pub fn apply_hinv(&self, r: &BlockVector) -> Result<BlockVector> {
        self.check(r)?;
        let t0 = Instant::now();
        let mut t = self.plan.inverse_transpose(r)?;
        Timings::add(&self.timings.fft_nanos, t0);

        let t1 = Instant::now();
        let c = 2.0 * self.tau / self.steps as f64;
        t.par_blocks_mut().enumerate().for_each(|(k, block)| {
            let z = self.solvers[k].apply_inverse(block);
            let y = self.a_ref.mul_vec(&z);
            let x = self.solvers[k].apply_inverse(&y);
            for (b, x) in block.iter_mut().zip(x) {
                *b = c * x;
            }
        });
        Timings::add(&self.timings.spatial_nanos, t1);

        let t2 = Instant::now();
        let out = self.plan.inverse(&t)?;
        Timings::add(&self.timings.fft_nanos, t2);
        Ok(out)
    }

    /// `Phi^T H_hat Phi u`; available with direct solvers only.
    pub fn apply_h(&self, u: &BlockVector) -> Result<BlockVector> {
        let a_fac = self.a_ref_factor.as_ref().ok_or(Error::DiagnosticModeRequired)?;
        self.check(u)?;
        let mut t = self.plan.forward(u)?;
        let c = self.steps as f64 / (2.0 * self.tau);
        t.par_blocks_mut().enumerate().for_each(|(k, block)| {
            let hk = self.mass.linear_combination(self.mu[k], &self.a_ref, self.tau).expect("same dimensions");
            let mut y = hk.mul_vec(block);
            a_fac.solve_in_place(&mut y);
            let x = hk.mul_vec(&y);
            for (b, x) in block.iter_mut().zip(x) {
                *b = c * x;
            }
        });
        self.plan.forward_transpose(&t)
    }
}

/// Extremal eigenvalues of the pencil
/// `(M A^{-1} M + lambda A, (M + sqrt(lambda) A) A^{-1} (M + sqrt(lambda) A))`
/// for small dense SPD `m`, `a`.
pub fn pearson_wathen_extremes(
    m: &nalgebra::DMatrix<f64>,
    a: &nalgebra::DMatrix<f64>,
    lambda: f64,
) -> Result<(f64, f64)> {
    let ainv = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("second matrix".into()))?
        .inverse();
    let num = m * &ainv * m + a * lambda;
    let g = m + a * lambda.sqrt();
    let den = &g * &ainv * &g;
    let sym = |x: nalgebra::DMatrix<f64>| (&x + x.transpose()) * 0.5;
    crate::linalg::dense_generalized_eig_extremal(&sym(num), &sym(den), m.nrows().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ScaledMatrix, Space, TimeGrid};
    use crate::model::HeatProblem;
    use crate::operators::dense_block_matrix;

    fn scalar_spec(steps: usize) -> ProblemSpec {
        let one = Arc::new(SpatialMatrix::identity(1));
        let a = ScaledMatrix::new(1.0, one.clone());
        ProblemSpec::new(
            one,
            vec![a.clone(); steps],
            TimeGrid::uniform(steps, steps as f64).unwrap(),
            vec![vec![0.0]; steps],
            vec![0.0],
            1.0,
            a,
        )
        .unwrap()
    }

    #[test]
    fn mu_values() {
        let p = SchurPreconditioner::build(&scalar_spec(1), SolverKind::Direct, None).unwrap();
        assert!((p.mu()[0] - 2f64.sqrt()).abs() < 1e-15);
        let p = SchurPreconditioner::build(&scalar_spec(2), SolverKind::Direct, None).unwrap();
        assert!((p.mu()[0] - 0.7653668647).abs() < 1e-10 && (p.mu()[1] - 1.8477590650).abs() < 1e-10);
        let p = SchurPreconditioner::build(&scalar_spec(37), SolverKind::Direct, None).unwrap();
        assert!(p.mu().windows(2).all(|w| w[0] > 0.0 && w[1] > w[0]));
    }

    #[test]
    fn scalar_one_step_inverse() {
        let p = SchurPreconditioner::build(&scalar_spec(1), SolverKind::Direct, None).unwrap();
        let h = (2f64.sqrt() + 1.0).powi(2) / 2.0;
        let r = BlockVector::from_vec(1, 1, vec![1.0]).unwrap();
        let x = p.apply_hinv(&r).unwrap();
        assert!((x.as_slice()[0] - 1.0 / h).abs() < 1e-14);
        assert!((p.apply_h(&r).unwrap().as_slice()[0] - h).abs() < 1e-14);
    }

    #[test]
    fn h_k_entries() {
        let spec = HeatProblem::new(Space::OneD, 4, TimeGrid::uniform(3, 1.0).unwrap()).unwrap().build().unwrap();
        let p = SchurPreconditioner::build(&spec, SolverKind::Direct, None).unwrap();
        let h1 = p.h_k(0).unwrap();
        let (m, a) = (spec.mass(), p.a_ref());
        for i in 0..3 {
            for j in 0..3 {
                let expect = p.mu()[0] * m.get(i, j) + spec.tau_ref() * a.get(i, j);
                assert!((h1.get(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn h_round_trip_and_dense_agreement() {
        let spec = HeatProblem::new(Space::OneD, 4, TimeGrid::uniform(4, 1.0).unwrap()).unwrap().build().unwrap();
        let p = SchurPreconditioner::build(&spec, SolverKind::Direct, None).unwrap();
        let r = BlockVector::from_fn(4, 3, |n, i| ((n * 3 + i) as f64).cos());
        let back = p.apply_hinv(&p.apply_h(&r).unwrap()).unwrap();
        assert!(back.sub(&r).max_abs() < 1e-11 * r.max_abs());

        // dense H = Phi^T H_hat Phi from explicit transform and block matrices
        let (steps, dim) = (4, 3);
        let h = dense_block_matrix(steps, dim, |u| p.apply_h(u)).unwrap();
        let phi = dense_block_matrix(steps, dim, |u| p.plan().forward(u)).unwrap();
        let ad = p.a_ref().to_dense();
        let ainv = ad.try_inverse().unwrap();
        let mut hhat = nalgebra::DMatrix::zeros(steps * dim, steps * dim);
        for k in 0..steps {
            let hk = p.h_k(k).unwrap().to_dense();
            let blk = &hk * &ainv * &hk * (steps as f64 / (2.0 * p.tau()));
            hhat.view_mut((k * dim, k * dim), (dim, dim)).copy_from(&blk);
        }
        let oracle = phi.transpose() * hhat * phi;
        assert!((h - &oracle).amax() < 1e-12 * oracle.amax());
    }

    #[test]
    fn approximate_mode_refuses_forward_h() {
        let spec = HeatProblem::new(Space::OneD, 8, TimeGrid::uniform(4, 1.0).unwrap()).unwrap().build().unwrap();
        let h = crate::spatial::hierarchy_for(&spec).unwrap();
        let p = SchurPreconditioner::build(&spec, SolverKind::mg(1), h.as_ref()).unwrap();
        let u = BlockVector::zeros(4, 7);
        assert!(matches!(p.apply_h(&u), Err(Error::DiagnosticModeRequired)));
        assert!(p.apply_hinv(&u).unwrap().is_zero());
    }

    #[test]
    fn pearson_wathen_trivial_lambda() {
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 3.0]);
        let (lo, hi) = pearson_wathen_extremes(&m, &a, 0.0).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let (lo, hi) = pearson_wathen_extremes(&m, &a, 10.0).unwrap();
        assert!(lo >= 0.5 - 1e-10 && hi <= 1.0 + 1e-10);
    }
}
