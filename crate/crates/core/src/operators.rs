//! Matrix-free time-global operators and the norms built from them.
//!
//! With `A = blockdiag(tau_n A_n)` and `K` the block bidiagonal matrix
//! `(K u)_n = M (u_n - u_{n-1})`, the implicit Euler sweep is `B u = f` with
//! `B = K + A`. Its symmetrization has Schur complement
//! `S = K^T A^{-1} K + K + K^T + A` and the saddle operator
//! `[[A, -K], [-K^T, -(K + K^T + A)]]`.
//!
//! Anything needing `A^{-1}` (`P`, `S`, the dual norms) requires exact
//! factorizations and lives behind [`TimeGlobalSystem::with_exact_solvers`].

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, BlockVector, CholeskyFactor, SaddleVector};
use crate::model::ProblemSpec;

#[derive(Debug, Clone)]
struct ExactSolvers {
    factors: Vec<Arc<CholeskyFactor>>,
    /// Step `n` uses `factors[index[n]]`.
    index: Vec<usize>,
}

/// The time-global system `B u = f` for one [`ProblemSpec`].
#[derive(Debug, Clone)]
pub struct TimeGlobalSystem {
    spec: ProblemSpec,
    rhs: BlockVector,
    exact: Option<ExactSolvers>,
}

impl TimeGlobalSystem {
    pub fn new(spec: ProblemSpec) -> Self {
        let rhs = assemble_rhs(&spec);
        Self { spec, rhs, exact: None }
    }

    /// Factorizes every distinct stiffness base so that `A^{-1}` is available.
    pub fn with_exact_solvers(mut self) -> Result<Self> {
        if self.exact.is_some() {
            return Ok(self);
        }
        let mut seen: HashMap<*const _, usize> = HashMap::new();
        let mut factors = Vec::new();
        let mut index = Vec::with_capacity(self.spec.steps());
        for a in self.spec.stiffness() {
            let key = Arc::as_ptr(&a.base);
            let id = match seen.get(&key) {
                Some(&id) => id,
                None => {
                    factors.push(Arc::new(CholeskyFactor::new(&a.base)?));
                    seen.insert(key, factors.len() - 1);
                    factors.len() - 1
                }
            };
            index.push(id);
        }
        self.exact = Some(ExactSolvers { factors, index });
        Ok(self)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn has_exact_solvers(&self) -> bool {
        self.exact.is_some()
    }

    /// `f = [tau_1 f_1 + M u_I, tau_2 f_2, ...]`.
    pub fn rhs(&self) -> &BlockVector {
        &self.rhs
    }

    pub fn steps(&self) -> usize {
        self.spec.steps()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn zeros(&self) -> BlockVector {
        BlockVector::zeros(self.steps(), self.dim())
    }

    fn check(&self, u: &BlockVector) -> Result<()> {
        check_dim(self.steps(), u.steps())?;
        check_dim(self.dim(), u.dim())
    }

    fn blockwise(&self, u: &BlockVector, f: impl Fn(usize, &mut [f64]) + Sync) -> Result<BlockVector> {
        self.check(u)?;
        let mut out = self.zeros();
        out.par_blocks_mut().enumerate().for_each(|(n, y)| f(n, y));
        Ok(out)
    }

    /// `(K u)_n = M (u_n - u_{n-1})`, `u_0 = 0`.
    pub fn apply_k(&self, u: &BlockVector) -> Result<BlockVector> {
        let m = self.spec.mass();
        self.blockwise(u, |n, y| {
            m.mul_into(u.block(n), y);
            if n > 0 {
                m.mul_add_into(-1.0, u.block(n - 1), y);
            }
        })
    }

    /// `(K^T u)_n = M (u_n - u_{n+1})`, `u_{N+1} = 0`.
    pub fn apply_kt(&self, u: &BlockVector) -> Result<BlockVector> {
        let m = self.spec.mass();
        let last = self.steps() - 1;
        self.blockwise(u, |n, y| {
            m.mul_into(u.block(n), y);
            if n < last {
                m.mul_add_into(-1.0, u.block(n + 1), y);
            }
        })
    }

    /// `(A u)_n = tau_n A_n u_n`.
    pub fn apply_abd(&self, u: &BlockVector) -> Result<BlockVector> {
        let spec = &self.spec;
        self.blockwise(u, |n, y| {
            let a = &spec.stiffness()[n];
            a.base.mul_into(u.block(n), y);
            let s = spec.tau(n) * a.scale;
            y.iter_mut().for_each(|v| *v *= s);
        })
    }

    /// `(A^{-1} u)_n = (tau_n A_n)^{-1} u_n`.
    pub fn apply_abd_inv(&self, u: &BlockVector) -> Result<BlockVector> {
        let exact = self.exact.as_ref().ok_or(Error::DiagnosticModeRequired)?;
        let spec = &self.spec;
        self.blockwise(u, |n, y| {
            y.copy_from_slice(u.block(n));
            exact.factors[exact.index[n]].solve_in_place(y);
            let s = 1.0 / (spec.tau(n) * spec.stiffness()[n].scale);
            y.iter_mut().for_each(|v| *v *= s);
        })
    }

    /// `B u = K u + A u`.
    pub fn apply_b(&self, u: &BlockVector) -> Result<BlockVector> {
        let mut y = self.apply_k(u)?;
        y.axpy(1.0, &self.apply_abd(u)?);
        Ok(y)
    }

    /// `B^T u = K^T u + A u`.
    pub fn apply_bt(&self, u: &BlockVector) -> Result<BlockVector> {
        let mut y = self.apply_kt(u)?;
        y.axpy(1.0, &self.apply_abd(u)?);
        Ok(y)
    }

    /// `(K + K^T + A) u`.
    pub fn apply_lower_right(&self, u: &BlockVector) -> Result<BlockVector> {
        let mut y = self.apply_k(u)?;
        y.axpy(1.0, &self.apply_kt(u)?);
        y.axpy(1.0, &self.apply_abd(u)?);
        Ok(y)
    }

    /// `[A p - K u, -K^T p - (K + K^T + A) u]`.
    pub fn apply_saddle(&self, w: &SaddleVector) -> Result<SaddleVector> {
        let mut top = self.apply_abd(&w.p)?;
        top.axpy(-1.0, &self.apply_k(&w.u)?);
        let mut bottom = self.apply_kt(&w.p)?;
        bottom.axpy(1.0, &self.apply_lower_right(&w.u)?);
        bottom.scale(-1.0);
        SaddleVector::new(top, bottom)
    }

    /// Right-hand side `[-f, -f]` of the saddle system.
    pub fn saddle_rhs(&self) -> SaddleVector {
        let g = self.rhs.scaled(-1.0);
        SaddleVector { p: g.clone(), u: g }
    }

    /// `P u = A^{-1} K u + u`, the optimal test function.
    pub fn apply_p(&self, u: &BlockVector) -> Result<BlockVector> {
        let mut y = self.apply_abd_inv(&self.apply_k(u)?)?;
        y.axpy(1.0, u);
        Ok(y)
    }

    /// `P^T u = K^T A^{-1} u + u`.
    pub fn apply_pt(&self, u: &BlockVector) -> Result<BlockVector> {
        let mut y = self.apply_kt(&self.apply_abd_inv(u)?)?;
        y.axpy(1.0, u);
        Ok(y)
    }

    /// `S u = K^T A^{-1} K u + (K + K^T + A) u`.
    pub fn apply_s(&self, u: &BlockVector) -> Result<BlockVector> {
        let mut y = self.apply_kt(&self.apply_abd_inv(&self.apply_k(u)?)?)?;
        y.axpy(1.0, &self.apply_lower_right(u)?);
        Ok(y)
    }

    /// `sum_n (u_n - u_{n-1}, v_n - v_{n-1})_M + (u_N, v_N)_M`.
    pub fn jump_form(&self, u: &BlockVector, v: &BlockVector) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let m = self.spec.mass();
        let dim = self.dim();
        let last = self.steps() - 1;
        let parts: Vec<f64> = (0..self.steps())
            .into_par_iter()
            .map(|n| {
                let du: Vec<f64> = (0..dim).map(|i| u.block(n)[i] - if n > 0 { u.block(n - 1)[i] } else { 0.0 }).collect();
                let dv: Vec<f64> = (0..dim).map(|i| v.block(n)[i] - if n > 0 { v.block(n - 1)[i] } else { 0.0 }).collect();
                let mut s = dot(&du, &m.mul_vec(&dv));
                if n == last {
                    s += dot(u.block(n), &m.mul_vec(v.block(n)));
                }
                s
            })
            .collect();
        Ok(parts.iter().sum())
    }

    /// `sum_n (K u)_n . (tau_n A_n)^{-1} (K v)_n`, the time-derivative part of `s`.
    pub fn dual_form(&self, u: &BlockVector, v: &BlockVector) -> Result<f64> {
        let ku = self.apply_k(u)?;
        let kv = if std::ptr::eq(u, v) { ku.clone() } else { self.apply_k(v)? };
        Ok(ku.dot(&self.apply_abd_inv(&kv)?))
    }

    fn energy_form(&self, u: &BlockVector, v: &BlockVector, weighted: bool) -> Result<f64> {
        let av = self.apply_abd(v)?;
        self.check(u)?;
        let last = self.steps() - 1;
        let parts: Vec<f64> = (0..self.steps())
            .map(|n| {
                let w = if weighted && n == last { 0.5 } else { 1.0 };
                w * dot(u.block(n), av.block(n))
            })
            .collect();
        Ok(parts.iter().sum())
    }

    /// `s(u, v) = dual + sum_n tau_n (u_n, v_n)_{A_n} + j(u, v)`, equal to `u . S v`.
    pub fn s_form(&self, u: &BlockVector, v: &BlockVector) -> Result<f64> {
        Ok(self.dual_form(u, v)? + self.energy_form(u, v, false)? + self.jump_form(u, v)?)
    }

    /// `s_D(u, v)`: `s` without the jumps and with weight 1/2 on the last energy term.
    pub fn s_d_form(&self, u: &BlockVector, v: &BlockVector) -> Result<f64> {
        Ok(self.dual_form(u, v)? + self.energy_form(u, v, true)?)
    }

    pub fn s_norm(&self, u: &BlockVector) -> Result<f64> {
        Ok(self.s_form(u, u)?.max(0.0).sqrt())
    }

    pub fn a_norm(&self, u: &BlockVector) -> Result<f64> {
        Ok(self.energy_form(u, u, false)?.max(0.0).sqrt())
    }

    /// `max_n ||u_n||_M`.
    pub fn max_m_norm(&self, u: &BlockVector) -> Result<f64> {
        self.check(u)?;
        let m = self.spec.mass();
        Ok(u.blocks().map(|b| m.quadratic_form(b).max(0.0).sqrt()).fold(0.0, f64::max))
    }
}

fn assemble_rhs(spec: &ProblemSpec) -> BlockVector {
    let mut f = BlockVector::zeros(spec.steps(), spec.dim());
    f.par_blocks_mut().enumerate().for_each(|(n, y)| {
        let tau = spec.tau(n);
        for (v, l) in y.iter_mut().zip(&spec.loads()[n]) {
            *v = tau * l;
        }
        if n == 0 {
            spec.mass().mul_add_into(1.0, spec.initial(), y);
        }
    });
    f
}

/// `sqrt(omega rho_A ||p||^2_{A~} + ||u||^2_{H~})`, given the forward actions
/// of `A~` and `H~`.
pub fn d_norm(
    w: &SaddleVector,
    omega: f64,
    rho_a: f64,
    a_approx: impl Fn(&BlockVector) -> Result<BlockVector>,
    h_approx: impl Fn(&BlockVector) -> Result<BlockVector>,
) -> Result<f64> {
    let p_part = if omega * rho_a == 0.0 { 0.0 } else { omega * rho_a * w.p.dot(&a_approx(&w.p)?) };
    let u_part = w.u.dot(&h_approx(&w.u)?);
    Ok((p_part + u_part).max(0.0).sqrt())
}

/// Dense matrix of a linear map on `V^N`, one column per unit vector.
/// Test and diagnostic use only.
pub fn dense_block_matrix(
    steps: usize,
    dim: usize,
    apply: impl Fn(&BlockVector) -> Result<BlockVector>,
) -> Result<DMatrix<f64>> {
    let size = steps * dim;
    let mut out = DMatrix::zeros(size, size);
    for j in 0..size {
        let mut e = BlockVector::zeros(steps, dim);
        e.as_mut_slice()[j] = 1.0;
        let col = apply(&e)?;
        check_dim(size, col.len())?;
        out.column_mut(j).copy_from_slice(col.as_slice());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpatialMatrix;
    use crate::model::{ScaledMatrix, TimeGrid};

    fn scalar_system(steps: usize, u0: f64) -> TimeGlobalSystem {
        let one = Arc::new(SpatialMatrix::identity(1));
        let a = ScaledMatrix::new(1.0, one.clone());
        let spec = ProblemSpec::new(
            one,
            vec![a.clone(); steps],
            TimeGrid::uniform(steps, steps as f64).unwrap(),
            vec![vec![0.0]; steps],
            vec![u0],
            1.0,
            a,
        )
        .unwrap();
        TimeGlobalSystem::new(spec).with_exact_solvers().unwrap()
    }

    fn bv(v: &[f64]) -> BlockVector {
        BlockVector::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn scalar_k_and_kt() {
        let s = scalar_system(3, 0.0);
        let u = bv(&[1.0, 1.0, 1.0]);
        assert_eq!(s.apply_k(&u).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(s.apply_kt(&u).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(s.apply_kt(&bv(&[0.0, 0.0, 1.0])).unwrap().as_slice(), &[0.0, -1.0, 1.0]);
        assert_eq!(s.apply_b(&u).unwrap().as_slice(), &[2.0, 1.0, 1.0]);
    }

    #[test]
    fn scalar_p_and_s() {
        let s = scalar_system(2, 0.0);
        assert_eq!(s.apply_p(&bv(&[1.0, 1.0])).unwrap().as_slice(), &[2.0, 1.0]);
        let s1 = scalar_system(1, 0.0);
        let u = bv(&[1.0]);
        assert_eq!(s1.apply_s(&u).unwrap().as_slice(), &[4.0]);
        assert!((s1.s_norm(&u).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_folds_initial_datum() {
        let s = scalar_system(3, 1.0);
        assert_eq!(s.rhs().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn production_mode_refuses_inverse() {
        let s = TimeGlobalSystem::new(scalar_system(2, 0.0).spec().clone());
        assert!(matches!(s.apply_s(&bv(&[1.0, 0.0])), Err(Error::DiagnosticModeRequired)));
        assert!(s.apply_k(&bv(&[1.0])).is_err());
    }

    #[test]
    fn saddle_recovers_rhs_at_solution() {
        // u = [1/2, 1/4, 1/8] solves the scalar sweep with u_I = 1
        let s = scalar_system(3, 1.0);
        let u = bv(&[0.5, 0.25, 0.125]);
        let w = SaddleVector::new(u.scaled(-1.0), u).unwrap();
        let g = s.apply_saddle(&w).unwrap();
        let expect = s.saddle_rhs();
        assert!(g.sub(&expect).norm() < 1e-15);
    }
}
