//! Extremal eigenvalues of symmetric-definite pencils.
//!
//! Two routes: a dense one (Cholesky reduction plus a symmetric
//! eigensolver) for small problems, and a matrix-free Lanczos iteration
//! with full reorthogonalization for everything else.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::block::dot;

/// Default ceiling on the dimension accepted by the dense path.
pub const DEFAULT_DENSE_LIMIT: usize = 20_000;

/// All eigenvalues (ascending) of `A x = lambda B x` with `B` SPD.
pub fn dense_generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>, limit: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    check_dim(n, a.ncols())?;
    check_dim(n, b.nrows())?;
    check_dim(n, b.ncols())?;
    if n > limit {
        return Err(Error::DenseLimitExceeded { dim: n, limit });
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("right-hand matrix of the pencil".into()))?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let sym = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// `(lambda_min, lambda_max)` of the pencil `(A, B)` by dense factorization.
pub fn dense_generalized_eig_extremal(a: &DMatrix<f64>, b: &DMatrix<f64>, limit: usize) -> Result<(f64, f64)> {
    let eig = dense_generalized_eigenvalues(a, b, limit)?;
    Ok((eig[0], eig[eig.len() - 1]))
}

/// `sqrt(x^T L x)` for SPD `L`.
pub fn weighted_norm(l: &crate::linalg::SpatialMatrix, x: &[f64]) -> Result<f64> {
    check_dim(l.dim(), x.len())?;
    let q = l.quadratic_form(x);
    let scale = dot(x, x);
    if q < -1e-14 * scale {
        return Err(Error::NotPositiveDefinite(format!("x^T L x = {q:.3e} < 0")));
    }
    Ok(q.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Relative Ritz residual at which both extremes count as converged;
    /// zero runs the full `max_iter` steps.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-10, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosResult {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub iterations: usize,
    pub breakdown: bool,
    pub converged: bool,
}

/// Lanczos iteration for an operator `T` that is self-adjoint in the inner
/// product `<x, y>_B = x^T B y`.
///
/// `apply_inner(x)` returns `B x`. `apply_op(x, bx)` returns `T x` and also
/// receives `B x`, which lets pencils `T = B^{-1} C` reuse the product.
pub fn lanczos_extremal<FB, FT>(
    dim: usize,
    mut apply_inner: FB,
    mut apply_op: FT,
    opts: &LanczosOptions,
) -> Result<LanczosResult>
where
    FB: FnMut(&[f64]) -> Result<Vec<f64>>,
    FT: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    if dim == 0 {
        return Err(Error::InvalidInput("Lanczos on an empty space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    lanczos_from(start, &mut apply_inner, &mut apply_op, opts)
}

/// As [`lanczos_extremal`], from a caller-supplied start vector.
pub fn lanczos_from<FB, FT>(
    start: Vec<f64>,
    apply_inner: &mut FB,
    apply_op: &mut FT,
    opts: &LanczosOptions,
) -> Result<LanczosResult>
where
    FB: FnMut(&[f64]) -> Result<Vec<f64>>,
    FT: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let max_iter = opts.max_iter.clamp(1, start.len());
    let mut q = start;
    let mut bq = apply_inner(&q)?;
    let nrm = dot(&q, &bq);
    if nrm <= 0.0 {
        return Err(Error::NotPositiveDefinite("Lanczos inner product".into()));
    }
    let nrm = nrm.sqrt();
    q.iter_mut().for_each(|v| *v /= nrm);
    bq.iter_mut().for_each(|v| *v /= nrm);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut bbasis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut scale = 0.0f64;
    let mut breakdown = false;
    let mut converged = false;
    let mut extremes = (f64::NAN, f64::NAN);

    for j in 0..max_iter {
        let mut w = apply_op(&q, &bq)?;
        let alpha = dot(&w, &bq);
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi -= alpha * qi;
        }
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= beta * pi;
            }
        }
        basis.push(q);
        bbasis.push(bq);
        alphas.push(alpha);
        scale = scale.max(alpha.abs());

        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for (qi, bqi) in basis.iter().zip(&bbasis) {
                let c = dot(&w, bqi);
                for (wk, qk) in w.iter_mut().zip(qi) {
                    *wk -= c * qk;
                }
            }
        }
        let bw = apply_inner(&w)?;
        let beta2 = dot(&w, &bw);
        let beta = beta2.max(0.0).sqrt();
        scale = scale.max(beta);

        let last = j + 1 == max_iter;
        let stop_now = beta <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        let check = stop_now || last || (opts.tol > 0.0 && (j + 1) % 5 == 0);
        if check {
            let (lo, hi, res_lo, res_hi) = ritz_extremes(&alphas, &betas, beta);
            extremes = (lo, hi);
            if opts.tol > 0.0 && res_lo <= opts.tol * lo.abs().max(1e-300) && res_hi <= opts.tol * hi.abs().max(1e-300) {
                converged = true;
            }
        }
        if stop_now {
            breakdown = true;
            converged = true;
            break;
        }
        if converged || last {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
        bq = bw.iter().map(|v| v / beta).collect();
    }

    Ok(LanczosResult {
        lambda_min: extremes.0,
        lambda_max: extremes.1,
        iterations: alphas.len(),
        breakdown,
        converged,
    })
}

/// Extreme Ritz values of the Lanczos tridiagonal and their residual bounds.
fn ritz_extremes(alphas: &[f64], betas: &[f64], next_beta: f64) -> (f64, f64, f64, f64) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let res = |i: usize| (next_beta * eig.eigenvectors[(m - 1, i)]).abs();
    (eig.eigenvalues[imin], eig.eigenvalues[imax], res(imin), res(imax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpatialMatrix;

    #[test]
    fn dense_pencil_trivial_cases() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (lo, hi) = dense_generalized_eig_extremal(&b, &b, 100).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let (lo, hi) = dense_generalized_eig_extremal(&(&b * 2.0), &b, 100).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0]));
        let (lo, hi) = dense_generalized_eig_extremal(&a, &DMatrix::identity(2, 2), 100).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dense_refuses_over_limit_and_non_spd() {
        let a = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            dense_generalized_eig_extremal(&a, &a, 2),
            Err(Error::DenseLimitExceeded { dim: 3, limit: 2 })
        ));
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(matches!(
            dense_generalized_eig_extremal(&a, &bad, 10),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn weighted_norm_cases() {
        assert_eq!(weighted_norm(&SpatialMatrix::identity(2), &[3.0, 4.0]).unwrap(), 5.0);
        let two = SpatialMatrix::identity(2).scaled(2.0);
        assert!((weighted_norm(&two, &[1.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let neg = SpatialMatrix::identity(2).scaled(-1.0);
        assert!(weighted_norm(&neg, &[1.0, 0.0]).is_err());
        assert_eq!(weighted_norm(&neg, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn lanczos_identity_breaks_down_immediately() {
        let r = lanczos_extremal(
            4,
            |x| Ok(x.to_vec()),
            |x, _| Ok(x.to_vec()),
            &LanczosOptions { max_iter: 10, tol: 0.0, seed: 1 },
        )
        .unwrap();
        assert!(r.breakdown);
        assert_eq!(r.iterations, 1);
        assert!((r.lambda_min - 1.0).abs() < 1e-14 && (r.lambda_max - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lanczos_full_krylov_space_is_exact() {
        let d = [1.0, 2.0, 4.0];
        let r = lanczos_extremal(
            3,
            |x| Ok(x.to_vec()),
            |x, _| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect()),
            &LanczosOptions { max_iter: 3, tol: 0.0, seed: 2 },
        )
        .unwrap();
        assert!((r.lambda_min - 1.0).abs() < 1e-12);
        assert!((r.lambda_max - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_generalized_matches_dense() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = &g * g.transpose() + DMatrix::identity(n, n);
        let h = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = &h * h.transpose() + DMatrix::identity(n, n) * 2.0;
        let (lo, hi) = dense_generalized_eig_extremal(&a, &b, 1000).unwrap();
        let bchol = b.clone().cholesky().unwrap();
        let r = lanczos_extremal(
            n,
            |x| Ok((&b * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()),
            |x, _| {
                let ax = &a * nalgebra::DVector::from_column_slice(x);
                Ok(bchol.solve(&ax).as_slice().to_vec())
            },
            &LanczosOptions { max_iter: 60, tol: 1e-12, seed: 4 },
        )
        .unwrap();
        assert!(((r.lambda_min - lo) / lo).abs() < 1e-6, "{} vs {}", r.lambda_min, lo);
        assert!(((r.lambda_max - hi) / hi).abs() < 1e-6);
    }
}
