//! Outer solvers for the saddle-point system: inexact Uzawa, preconditioned
//! MINRES, the sequential implicit Euler sweep used as the reference
//! solution, and the theoretical Uzawa contraction rate.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{BlockVector, CholeskyFactor, SaddleVector};
use crate::model::ProblemSpec;
use crate::operators::{d_norm, TimeGlobalSystem};
use crate::schur::SchurPreconditioner;
use crate::spatial::BlockDiagonalSolver;

/// Residual growth factor treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// When to stop the outer iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stopping {
    /// Relative preconditioned residual `sqrt(r_p.A~^{-1}r_p + r_u.H~^{-1}r_u)`.
    PreconditionedResidual,
    /// Relative error `||u - u_j||_S / ||u||_S` against the sequential
    /// solution. Needs exact spatial factorizations.
    SNormError,
}

#[derive(Debug, Clone)]
pub struct UzawaConfig {
    pub omega: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub stopping: Stopping,
    pub record_history: bool,
    /// Track the error in the D-norm with this `rho_A` (diagnostic).
    pub d_norm_rho: Option<f64>,
    /// Reference solution for the error norms; computed by the sequential
    /// sweep when needed and absent.
    pub reference: Option<Arc<BlockVector>>,
}

impl Default for UzawaConfig {
    fn default() -> Self {
        Self {
            omega: 0.9,
            max_iter: 500,
            tol: 1e-6,
            stopping: Stopping::PreconditionedResidual,
            record_history: true,
            d_norm_rho: None,
            reference: None,
        }
    }
}

impl UzawaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidInput("omega and tol must be positive".into()));
        }
        if self.d_norm_rho.is_some_and(|r| !(0.0..1.0).contains(&r)) {
            return Err(Error::InvalidInput("rho_A must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One row of a convergence history; row 0 describes the initial guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub residual: Option<f64>,
    pub s_norm_error: Option<f64>,
    pub d_norm_error: Option<f64>,
    pub wall_seconds: f64,
    pub fft_seconds: f64,
    pub spatial_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub rows: Vec<HistoryRow>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl ConvergenceHistory {
    pub const CSV_HEADER: &'static str = "iter,residual,s_norm_error,d_norm_error,wall_seconds,fft_seconds,spatial_seconds";

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e},{:.16e}",
                r.iter,
                opt_cell(r.residual),
                opt_cell(r.s_norm_error),
                opt_cell(r.d_norm_error),
                r.wall_seconds,
                r.fft_seconds,
                r.spatial_seconds
            );
        }
        out
    }

    /// Ratios of consecutive D-norm errors.
    pub fn d_norm_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .filter_map(|w| match (w[0].d_norm_error, w[1].d_norm_error) {
                (Some(a), Some(b)) if a > 0.0 => Some(b / a),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: SaddleVector,
    pub iterations: usize,
    pub converged: bool,
    pub history: ConvergenceHistory,
}

/// Conjugate gradients for `G y = b` with SPD `G`; applies the forward
/// action of a preconditioner known only through its inverse.
pub fn block_cg(
    apply: impl Fn(&BlockVector) -> Result<BlockVector>,
    b: &BlockVector,
    tol: f64,
    max_iter: usize,
) -> Result<BlockVector> {
    let mut x = BlockVector::zeros(b.steps(), b.dim());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let stop = tol * tol * rr;
    for _ in 0..max_iter {
        if rr <= stop || rr == 0.0 {
            break;
        }
        let q = apply(&p)?;
        let pq = p.dot(&q);
        if pq <= 0.0 {
            return Err(Error::IndefinitePreconditioner(pq));
        }
        let a = rr / pq;
        x.axpy(a, &p);
        r.axpy(-a, &q);
        let rr_new = r.dot(&r);
        p.scale(rr_new / rr);
        p.axpy(1.0, &r);
        rr = rr_new;
    }
    Ok(x)
}

/// Forward actions of `A~` and `H~` for the D-norm.
struct ForwardOps<'a> {
    system: &'a TimeGlobalSystem,
    a_tilde: &'a BlockDiagonalSolver,
    h_tilde: &'a SchurPreconditioner,
}

impl ForwardOps<'_> {
    fn a(&self, x: &BlockVector) -> Result<BlockVector> {
        if self.a_tilde.kind().is_direct() {
            self.system.apply_abd(x)
        } else {
            block_cg(|v| self.a_tilde.apply(v), x, 1e-13, 10_000)
        }
    }

    fn h(&self, x: &BlockVector) -> Result<BlockVector> {
        if self.h_tilde.kind().is_direct() {
            self.h_tilde.apply_h(x)
        } else {
            block_cg(|v| self.h_tilde.apply_hinv(v), x, 1e-13, 10_000)
        }
    }
}

struct ErrorTracker<'a> {
    system: &'a TimeGlobalSystem,
    reference: Option<Arc<BlockVector>>,
    ref_s_norm: f64,
    d_norm: Option<(f64, ForwardOps<'a>)>,
    omega: f64,
}

impl<'a> ErrorTracker<'a> {
    fn new(
        system: &'a TimeGlobalSystem,
        a_tilde: &'a BlockDiagonalSolver,
        h_tilde: &'a SchurPreconditioner,
        omega: f64,
        need_s: bool,
        d_norm_rho: Option<f64>,
        reference: Option<Arc<BlockVector>>,
    ) -> Result<Self> {
        let reference = if need_s || d_norm_rho.is_some() {
            Some(match reference {
                Some(r) => r,
                None => Arc::new(sequential_euler_solve(system.spec())?),
            })
        } else {
            None
        };
        let ref_s_norm = match (&reference, need_s) {
            (Some(r), true) => system.s_norm(r)?,
            _ => 0.0,
        };
        let d_norm = d_norm_rho.map(|rho| (rho, ForwardOps { system, a_tilde, h_tilde }));
        Ok(Self { system, reference, ref_s_norm, d_norm, omega })
    }

    /// Relative s-norm error of `u` (absolute when the reference vanishes).
    fn s_error(&self, u: &BlockVector) -> Result<Option<f64>> {
        match &self.reference {
            Some(r) if self.system.has_exact_solvers() => {
                let e = self.system.s_norm(&u.sub(r))?;
                Ok(Some(if self.ref_s_norm > 0.0 { e / self.ref_s_norm } else { e }))
            }
            _ => Ok(None),
        }
    }

    fn d_error(&self, w: &SaddleVector) -> Result<Option<f64>> {
        let (Some((rho, ops)), Some(r)) = (&self.d_norm, &self.reference) else {
            return Ok(None);
        };
        let e = SaddleVector::new(w.p.add(r), w.u.sub(r))?;
        Ok(Some(d_norm(&e, self.omega, *rho, |x| ops.a(x), |x| ops.h(x))?))
    }
}

/// Inexact Uzawa iteration
///
/// `p_{j+1} = p_j + A~^{-1}(K u_j - A p_j - f)`,
/// `u_{j+1} = u_j + omega H~^{-1}(f - K^T p_{j+1} - (K + K^T + A) u_j)`.
pub fn uzawa_solve(
    system: &TimeGlobalSystem,
    a_tilde: &BlockDiagonalSolver,
    h_tilde: &SchurPreconditioner,
    cfg: &UzawaConfig,
    initial: Option<SaddleVector>,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    let need_s = cfg.stopping == Stopping::SNormError;
    if need_s && !system.has_exact_solvers() {
        return Err(Error::DiagnosticModeRequired);
    }
    let tracker = ErrorTracker::new(system, a_tilde, h_tilde, cfg.omega, need_s, cfg.d_norm_rho, cfg.reference.clone())?;
    let f = system.rhs();
    let mut w = match initial {
        Some(w) => {
            let z = system.zeros();
            z.check_shape(&w.p)?;
            z.check_shape(&w.u)?;
            w
        }
        None => SaddleVector::zeros(system.steps(), system.dim()),
    };

    let start = Instant::now();
    let (fft0, sp0) = (h_tilde.timings().fft_seconds(), h_tilde.timings().spatial_seconds());
    let mut a_seconds = 0.0;
    let mut history = ConvergenceHistory::default();
    let mut record = |iter: usize, residual: Option<f64>, s: Option<f64>, d: Option<f64>, a_secs: f64| {
        if cfg.record_history {
            history.rows.push(HistoryRow {
                iter,
                residual,
                s_norm_error: s,
                d_norm_error: d,
                wall_seconds: start.elapsed().as_secs_f64(),
                fft_seconds: h_tilde.timings().fft_seconds() - fft0,
                spatial_seconds: h_tilde.timings().spatial_seconds() - sp0 + a_secs,
            });
        }
    };

    let s0 = tracker.s_error(&w.u)?;
    record(0, None, s0, tracker.d_error(&w)?, 0.0);
    if need_s && s0.is_some_and(|e| e <= cfg.tol) {
        return Ok(SolveOutcome { solution: w, iterations: 0, converged: true, history });
    }

    let mut res0 = None;
    let mut converged = false;
    let mut iterations = 0;
    for j in 0..cfg.max_iter {
        let mut rp = system.apply_k(&w.u)?;
        rp.axpy(-1.0, &system.apply_abd(&w.p)?);
        rp.axpy(-1.0, f);
        let t = Instant::now();
        let dp = a_tilde.apply(&rp)?;
        a_seconds += t.elapsed().as_secs_f64();
        w.p.axpy(1.0, &dp);

        let mut ru = f.clone();
        ru.axpy(-1.0, &system.apply_kt(&w.p)?);
        ru.axpy(-1.0, &system.apply_lower_right(&w.u)?);
        let du = h_tilde.apply_hinv(&ru)?;

        let (pp, uu) = (rp.dot(&dp), ru.dot(&du));
        if pp < 0.0 || uu < 0.0 {
            return Err(Error::IndefinitePreconditioner(pp.min(uu)));
        }
        let res = (pp + uu).sqrt();
        if j == 0 && res == 0.0 {
            // already an exact solution; the update is zero
            converged = true;
            break;
        }
        w.u.axpy(cfg.omega, &du);
        iterations = j + 1;

        let r0 = *res0.get_or_insert(res);
        let rel = res / r0;
        if !rel.is_finite() || rel > DIVERGENCE_FACTOR {
            return Err(Error::Diverged { iteration: iterations, growth: rel });
        }
        let s = tracker.s_error(&w.u)?;
        record(iterations, Some(rel), s, tracker.d_error(&w)?, a_seconds);
        let done = match cfg.stopping {
            Stopping::PreconditionedResidual => rel <= cfg.tol,
            Stopping::SNormError => {
                let e = s.expect("s-norm tracking active");
                if !e.is_finite() || s0.is_some_and(|e0| e > DIVERGENCE_FACTOR * e0.max(1.0)) {
                    return Err(Error::Diverged { iteration: iterations, growth: e });
                }
                e <= cfg.tol
            }
        };
        if done {
            converged = true;
            break;
        }
    }
    Ok(SolveOutcome { solution: w, iterations, converged, history })
}

/// Preconditioned MINRES on the saddle system with the block-diagonal
/// preconditioner `diag(A~, H~)`.
pub fn minres_solve(
    system: &TimeGlobalSystem,
    a_tilde: &BlockDiagonalSolver,
    h_tilde: &SchurPreconditioner,
    tol: f64,
    max_iter: usize,
    stopping: Stopping,
) -> Result<SolveOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let need_s = stopping == Stopping::SNormError;
    if need_s && !system.has_exact_solvers() {
        return Err(Error::DiagnosticModeRequired);
    }
    let tracker = ErrorTracker::new(system, a_tilde, h_tilde, 1.0, need_s, None, None)?;
    let precond = |v: &SaddleVector| -> Result<SaddleVector> {
        SaddleVector::new(a_tilde.apply(&v.p)?, h_tilde.apply_hinv(&v.u)?)
    };
    let start = Instant::now();
    let mut history = ConvergenceHistory::default();
    let mut x = SaddleVector::zeros(system.steps(), system.dim());
    let s0 = tracker.s_error(&x.u)?;
    let mut push = |iter, residual, s| {
        history.rows.push(HistoryRow {
            iter,
            residual,
            s_norm_error: s,
            d_norm_error: None,
            wall_seconds: start.elapsed().as_secs_f64(),
            fft_seconds: 0.0,
            spatial_seconds: 0.0,
        })
    };
    push(0, Some(1.0), s0);

    let mut v = system.saddle_rhs();
    let mut z = precond(&v)?;
    let zv = z.dot(&v);
    if zv < 0.0 {
        return Err(Error::IndefinitePreconditioner(zv));
    }
    let mut gamma = zv.sqrt();
    if gamma == 0.0 {
        return Ok(SolveOutcome { solution: x, iterations: 0, converged: true, history });
    }
    let eta0 = gamma;
    let mut eta = gamma;
    let mut v_prev = SaddleVector::zeros(system.steps(), system.dim());
    let mut w = v_prev.clone();
    let mut w_prev = v_prev.clone();
    let (mut gamma_prev, mut c_prev, mut c, mut s_prev, mut s) = (1.0, 1.0, 1.0, 0.0, 0.0);
    let mut converged = false;
    let mut iterations = 0;

    for j in 0..max_iter {
        z.scale(1.0 / gamma);
        let az = system.apply_saddle(&z)?;
        let delta = az.dot(&z);
        let mut v_new = az;
        v_new.axpy(-delta / gamma, &v);
        v_new.axpy(-gamma / gamma_prev, &v_prev);
        let z_new = precond(&v_new)?;
        let zv = z_new.dot(&v_new);
        if zv < -1e-14 * delta.abs().max(1.0) {
            return Err(Error::IndefinitePreconditioner(zv));
        }
        let gamma_new = zv.max(0.0).sqrt();
        let alpha0 = c * delta - c_prev * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_new * gamma_new).sqrt();
        let alpha2 = s * delta + c_prev * c * gamma;
        let alpha3 = s_prev * gamma;
        c_prev = c;
        s_prev = s;
        c = alpha0 / alpha1;
        s = gamma_new / alpha1;
        let mut w_new = z.clone();
        w_new.axpy(-alpha3, &w_prev);
        w_new.axpy(-alpha2, &w);
        w_new.scale(1.0 / alpha1);
        x.axpy(c * eta, &w_new);
        eta = -s * eta;
        iterations = j + 1;

        let rel = eta.abs() / eta0;
        let err = tracker.s_error(&x.u)?;
        push(iterations, Some(rel), err);
        let done = match stopping {
            Stopping::PreconditionedResidual => rel <= tol,
            Stopping::SNormError => err.expect("s-norm tracking active") <= tol,
        };
        if done || gamma_new == 0.0 {
            converged = true;
            break;
        }
        v_prev = v;
        v = v_new;
        z = z_new;
        gamma_prev = gamma;
        gamma = gamma_new;
        w_prev = w;
        w = w_new;
    }
    Ok(SolveOutcome { solution: x, iterations, converged, history })
}

/// `(M + tau_n A_n) u_n = M u_{n-1} + tau_n f_n` step by step.
pub fn sequential_euler_solve(spec: &ProblemSpec) -> Result<BlockVector> {
    let mut factors: HashMap<(*const crate::linalg::SpatialMatrix, u64), Arc<CholeskyFactor>> = HashMap::new();
    let mut u = BlockVector::zeros(spec.steps(), spec.dim());
    let m = spec.mass();
    let mut prev = spec.initial().to_vec();
    for n in 0..spec.steps() {
        let a = &spec.stiffness()[n];
        let coef = spec.tau(n) * a.scale;
        let key = (Arc::as_ptr(&a.base), coef.to_bits());
        let factor = match factors.get(&key) {
            Some(f) => f.clone(),
            None => {
                let f = Arc::new(CholeskyFactor::new(&m.linear_combination(1.0, &a.base, coef)?)?);
                factors.insert(key, f.clone());
                f
            }
        };
        let mut rhs = m.mul_vec(&prev);
        for (r, l) in rhs.iter_mut().zip(&spec.loads()[n]) {
            *r += spec.tau(n) * l;
        }
        factor.solve_in_place(&mut rhs);
        u.block_mut(n).copy_from_slice(&rhs);
        prev = rhs;
    }
    Ok(u)
}

/// Theoretical contraction rate of the inexact Uzawa iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub rho_a: f64,
    pub omega: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub rho_u: f64,
    /// `omega lambda_max < 2 (1 - rho_A) / (1 + rho_A)`.
    pub damping_ok: bool,
}

pub fn compute_rate_report(rho_a: f64, omega: f64, lambda_min: f64, lambda_max: f64) -> Result<RateReport> {
    if !(0.0..1.0).contains(&rho_a) {
        return Err(Error::InvalidInput(format!("rho_A must lie in [0, 1), got {rho_a}")));
    }
    if !(omega > 0.0 && lambda_min > 0.0 && lambda_max >= lambda_min) {
        return Err(Error::InvalidInput("need omega > 0 and 0 < lambda_min <= lambda_max".into()));
    }
    let r = rho_a;
    let lo = 1.0 - omega * lambda_min;
    let sigma_minus = 0.5 * ((1.0 - r) * lo + (4.0 * r + (1.0 - r).powi(2) * lo * lo).sqrt());
    let hi = (1.0 + r) * (1.0 + omega * lambda_max) - 2.0;
    let sigma_plus = 0.5 * (hi + (4.0 * r + hi * hi).sqrt());
    Ok(RateReport {
        rho_a,
        omega,
        lambda_min,
        lambda_max,
        sigma_minus,
        sigma_plus,
        rho_u: sigma_minus.max(sigma_plus),
        damping_ok: omega * lambda_max < 2.0 * (1.0 - r) / (1.0 + r),
    })
}
