//! Reproducible experiments: preconditioned spectra, iteration counts,
//! convergence histories, bound checks and thread scaling.
//!
//! Every experiment returns plain rows plus a CSV rendering with a fixed
//! header and 17 significant digits.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{dense_generalized_eig_extremal, lanczos_extremal, BlockVector, LanczosOptions};
use crate::model::{build_time_grid, Coefficient, GridKind, HeatData, HeatProblem, ProblemSpec, Space, TimeGrid};
use crate::operators::{dense_block_matrix, TimeGlobalSystem};
use crate::schur::SchurPreconditioner;
use crate::solvers::{
    minres_solve, sequential_euler_solve, uzawa_solve, ConvergenceHistory, SolveOutcome, Stopping, UzawaConfig,
};
use crate::spatial::{estimate_gamma_gamma, hierarchy_for, BlockDiagonalSolver, SolverKind};

/// Total dimension up to which the dense eigen route is used by default.
pub const DENSE_ROUTE_LIMIT: usize = 1024;

/// Formats a float for CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    Dense,
    Lanczos,
}

impl std::fmt::Display for EigMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EigMethod::Dense => "dense",
            EigMethod::Lanczos => "lanczos",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: EigMethod,
    pub iterations: usize,
    pub converged: bool,
}

impl Spectrum {
    pub fn kappa(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// Extremal eigenvalues of `H~^{-1} S`, i.e. of the pencil `(S, H~)`.
///
/// Dense route up to `dense_limit` unknowns (pencil `(S H~^{-1} S, S)`),
/// otherwise Lanczos in the `S` inner product.
pub fn preconditioned_spectrum(
    system: &TimeGlobalSystem,
    schur: &SchurPreconditioner,
    dense_limit: usize,
    opts: &LanczosOptions,
) -> Result<Spectrum> {
    let (steps, dim) = (system.steps(), system.dim());
    let size = steps * dim;
    if size <= dense_limit {
        let s = dense_block_matrix(steps, dim, |u| system.apply_s(u))?;
        let hinv = dense_block_matrix(steps, dim, |u| schur.apply_hinv(u))?;
        let hinv = (&hinv + hinv.transpose()) * 0.5;
        let shs = &s * hinv * &s;
        let shs = (&shs + shs.transpose()) * 0.5;
        let (lo, hi) = dense_generalized_eig_extremal(&shs, &s, dense_limit)?;
        return Ok(Spectrum { lambda_min: lo, lambda_max: hi, method: EigMethod::Dense, iterations: 0, converged: true });
    }
    let wrap = |x: &[f64]| BlockVector::from_vec(steps, dim, x.to_vec());
    let r = lanczos_extremal(
        size,
        |x| Ok(system.apply_s(&wrap(x)?)?.into_vec()),
        |_, sx| Ok(schur.apply_hinv(&wrap(sx)?)?.into_vec()),
        opts,
    )?;
    Ok(Spectrum {
        lambda_min: r.lambda_min,
        lambda_max: r.lambda_max,
        method: EigMethod::Lanczos,
        iterations: r.iterations,
        converged: r.converged,
    })
}

/// Lanczos settings used for the preconditioned spectra.
pub fn spectrum_lanczos_options() -> LanczosOptions {
    LanczosOptions { max_iter: 400, tol: 1e-9, seed: 0x5eed }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub h: f64,
    pub steps: usize,
    pub spectrum: Spectrum,
}

pub const TABLE1_HEADER: &str = "h,N,lambda_min,lambda_max,kappa";

/// 1D heat equation on `(0, 1)` with `T = 1`, uniform steps and exact
/// solvers: extremal eigenvalues of `H^{-1} S`.
pub fn run_table1(h_list: &[f64], n_list: &[usize], dense_limit: usize) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for &h in h_list {
        let cells = cells_for(h)?;
        for &n in n_list {
            let spec = HeatProblem::new(Space::OneD, cells, TimeGrid::uniform(n, 1.0)?)?.build()?;
            let system = TimeGlobalSystem::new(spec.clone()).with_exact_solvers()?;
            let schur = SchurPreconditioner::build(&spec, SolverKind::Direct, None)?;
            let spectrum = preconditioned_spectrum(&system, &schur, dense_limit, &spectrum_lanczos_options())?;
            rows.push(Table1Row { h, steps: n, spectrum });
        }
    }
    Ok(rows)
}

pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut out = format!("{TABLE1_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.h),
            r.steps,
            fmt_f64(r.spectrum.lambda_min),
            fmt_f64(r.spectrum.lambda_max),
            fmt_f64(r.spectrum.kappa())
        );
    }
    out
}

/// Number of cells for a mesh size `h = 1 / cells`.
pub fn cells_for(h: f64) -> Result<usize> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidInput(format!("mesh size must lie in (0, 1), got {h}")));
    }
    let cells = (1.0 / h).round();
    if ((1.0 / cells) - h).abs() > 1e-9 * h {
        return Err(Error::InvalidInput(format!("mesh size {h} is not the reciprocal of an integer")));
    }
    Ok(cells as usize)
}

/// Preconditioners for one problem: `A~` over the time steps and `H~`.
pub struct Preconditioners {
    pub a_tilde: BlockDiagonalSolver,
    pub h_tilde: SchurPreconditioner,
}

/// Builds `A~` and `H~` of the given kind, with a multigrid hierarchy when
/// one is needed.
pub fn build_preconditioners(spec: &ProblemSpec, kind: SolverKind) -> Result<Preconditioners> {
    let hierarchy = match kind {
        SolverKind::Multigrid { .. } => Some(
            hierarchy_for(spec)?
                .ok_or_else(|| Error::InvalidInput("multigrid needs a mesh with a power-of-two number of cells >= 4".into()))?,
        ),
        _ => None,
    };
    Ok(Preconditioners {
        a_tilde: BlockDiagonalSolver::build(spec, kind, hierarchy.as_ref())?,
        h_tilde: SchurPreconditioner::build(spec, kind, hierarchy.as_ref())?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub h: f64,
    pub steps: usize,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

pub const TABLE2_HEADER: &str = "h,N,iterations";

/// 2D heat problem with `u(0) = sin(pi x) sin(pi y)`, zero forcing, `T = 1`.
pub fn table2_problem(h: f64, steps: usize) -> Result<ProblemSpec> {
    HeatProblem::new(Space::TwoD, cells_for(h)?, TimeGrid::uniform(steps, 1.0)?)?
        .data(HeatData::SineInitial)
        .build()
}

/// Uzawa iterations needed for `||u - u_j||_S < tol ||u||_S` with multigrid
/// spatial solvers.
pub fn run_table2(h_list: &[f64], n_list: &[usize], vcycles: usize, omega: f64, tol: f64) -> Result<Vec<Table2Row>> {
    let mut rows = Vec::new();
    for &n in n_list {
        for &h in h_list {
            let start = Instant::now();
            let spec = table2_problem(h, n)?;
            let system = TimeGlobalSystem::new(spec.clone()).with_exact_solvers()?;
            let pc = build_preconditioners(&spec, SolverKind::mg(vcycles))?;
            let cfg = UzawaConfig { omega, tol, stopping: Stopping::SNormError, max_iter: 200, ..Default::default() };
            let out = uzawa_solve(&system, &pc.a_tilde, &pc.h_tilde, &cfg, None)?;
            rows.push(Table2Row {
                h,
                steps: n,
                iterations: out.iterations,
                converged: out.converged,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

pub fn table2_csv(rows: &[Table2Row]) -> String {
    let mut out = format!("{TABLE2_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(r.h), r.steps, r.iterations);
    }
    out
}

/// Outer iteration used by `solve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Uzawa,
    Minres,
}

/// Flat experiment configuration; every field has a `key = value` spelling
/// shared by config files and command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub space: Space,
    /// Mesh sizes; `None` lets each experiment pick its own list.
    pub h: Option<Vec<f64>>,
    pub steps: Option<Vec<usize>>,
    pub final_time: f64,
    pub coefficient: Coefficient,
    /// Relative step perturbation; zero means a uniform grid.
    pub perturbation: f64,
    pub data: HeatData,
    pub omega: f64,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub solver: SolverKind,
    pub vcycles: Option<usize>,
    pub method: Method,
    pub stopping: Stopping,
    pub threads: Option<Vec<usize>>,
    pub seed: u64,
    pub dense_limit: usize,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            space: Space::OneD,
            h: None,
            steps: None,
            final_time: 1.0,
            coefficient: Coefficient::Constant(1.0),
            perturbation: 0.0,
            data: HeatData::SineInitial,
            omega: 0.9,
            tol: None,
            max_iter: 500,
            solver: SolverKind::Direct,
            vcycles: None,
            method: Method::Uzawa,
            stopping: Stopping::PreconditionedResidual,
            threads: None,
            seed: 0,
            dense_limit: DENSE_ROUTE_LIMIT,
            out: None,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::InvalidInput(format!("invalid value '{value}' for '{key}'"))
}

/// Parses `0.125` or `1/8`.
fn parse_real(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad(key, s))?, b.trim().parse().map_err(|_| bad(key, s))?);
            a / b
        }
        None => s.parse().map_err(|_| bad(key, s))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, s))
    }
}

fn parse_list<T>(key: &str, s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = s.split(',').map(|p| item(p.trim())).collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(bad(key, s));
    }
    Ok(items)
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| bad(key, s))
}

fn parse_reals(key: &str, s: &str, expected: usize) -> Result<Vec<f64>> {
    let v = parse_list(key, s, |p| parse_real(key, p))?;
    if v.len() != expected {
        return Err(bad(key, s));
    }
    Ok(v)
}

impl ExperimentConfig {
    /// Sets one field. Keys match the long command-line flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "space" | "dim" => {
                self.space = match value.to_ascii_lowercase().as_str() {
                    "1" | "1d" => Space::OneD,
                    "2" | "2d" => Space::TwoD,
                    _ => return Err(bad(key, value)),
                }
            }
            "h" => self.h = Some(parse_list(key, value, |p| parse_real(key, p))?),
            "N" | "n" | "steps" => self.steps = Some(parse_list(key, value, |p| parse_usize(key, p))?),
            "T" | "final_time" => self.final_time = parse_real(key, value)?,
            "coefficient" => {
                let (name, args) = value.split_once(':').unwrap_or((value, ""));
                self.coefficient = match name {
                    "constant" => Coefficient::Constant(parse_real(key, args)?),
                    "step" => {
                        let v = parse_reals(key, args, 3)?;
                        Coefficient::Step { before: v[0], after: v[1], switch_time: v[2] }
                    }
                    "sin" => {
                        let v = parse_reals(key, args, 3)?;
                        Coefficient::Sinusoidal { mean: v[0], amplitude: v[1], frequency: v[2] }
                    }
                    _ => return Err(bad(key, value)),
                };
                self.coefficient.validate()?;
            }
            "grid" => {
                self.perturbation = match value.split_once(':') {
                    None if value == "uniform" => 0.0,
                    Some(("perturbed", eps)) => parse_real(key, eps)?,
                    _ => return Err(bad(key, value)),
                }
            }
            "data" => {
                self.data = match value {
                    "sine" => HeatData::SineInitial,
                    "manufactured" => HeatData::Manufactured,
                    "random" => HeatData::Random { seed: self.seed },
                    "zero" => HeatData::Zero,
                    _ => return Err(bad(key, value)),
                }
            }
            "omega" => self.omega = parse_real(key, value)?,
            "tol" => self.tol = Some(parse_real(key, value)?),
            "max_iter" => self.max_iter = parse_usize(key, value)?,
            "solver" => self.solver = value.parse()?,
            "vcycles" => self.vcycles = Some(parse_usize(key, value)?),
            "method" => {
                self.method = match value {
                    "uzawa" => Method::Uzawa,
                    "minres" => Method::Minres,
                    _ => return Err(bad(key, value)),
                }
            }
            "stopping" => {
                self.stopping = match value {
                    "residual" => Stopping::PreconditionedResidual,
                    "snorm" => Stopping::SNormError,
                    _ => return Err(bad(key, value)),
                }
            }
            "threads" => self.threads = Some(parse_list(key, value, |p| parse_usize(key, p))?),
            "seed" => {
                self.seed = value.parse().map_err(|_| bad(key, value))?;
                if let HeatData::Random { .. } = self.data {
                    self.data = HeatData::Random { seed: self.seed };
                }
            }
            "dense_limit" => self.dense_limit = parse_usize(key, value)?,
            "out" => self.out = Some(value.to_string()),
            other => return Err(Error::InvalidInput(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key = value, got '{line}'") })?;
            self.set(k, v).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    fn first<T: Copy>(list: &Option<Vec<T>>, default: T) -> T {
        list.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
    }

    /// First configured mesh size, or `default`.
    pub fn h_or(&self, default: f64) -> f64 {
        Self::first(&self.h, default)
    }

    pub fn steps_or(&self, default: usize) -> usize {
        Self::first(&self.steps, default)
    }

    pub fn grid_kind(&self) -> GridKind {
        if self.perturbation == 0.0 {
            GridKind::Uniform
        } else {
            GridKind::Perturbed { perturbation: self.perturbation, seed: self.seed }
        }
    }

    /// Heat problem for one `(h, N)` pair.
    pub fn problem(&self, h: f64, steps: usize) -> Result<ProblemSpec> {
        let grid = build_time_grid(self.grid_kind(), steps, self.final_time)?;
        HeatProblem::new(self.space, cells_for(h)?, grid)?
            .coefficient(self.coefficient)
            .data(self.data)
            .build()
    }
}

/// Result of a single configured solve.
pub struct SolveReport {
    pub outcome: SolveOutcome,
    pub seconds: f64,
}

/// Solves one configured problem with Uzawa or MINRES; the history CSV is
/// the output.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<SolveReport> {
    let spec = cfg.problem(cfg.h_or(0.125), cfg.steps_or(16))?;
    let start = Instant::now();
    let system = TimeGlobalSystem::new(spec.clone()).with_exact_solvers()?;
    let pc = build_preconditioners(&spec, cfg.solver)?;
    let tol = cfg.tol.unwrap_or(1e-8);
    let outcome = match cfg.method {
        Method::Uzawa => {
            let ucfg = UzawaConfig {
                omega: cfg.omega,
                max_iter: cfg.max_iter,
                tol,
                stopping: cfg.stopping.clone(),
                ..Default::default()
            };
            uzawa_solve(&system, &pc.a_tilde, &pc.h_tilde, &ucfg, None)?
        }
        Method::Minres => minres_solve(&system, &pc.a_tilde, &pc.h_tilde, tol, cfg.max_iter, cfg.stopping.clone())?,
    };
    Ok(SolveReport { outcome, seconds: start.elapsed().as_secs_f64() })
}

/// Convergence history of one spatial solver choice.
#[derive(Debug, Clone)]
pub struct HistoryCurve {
    pub solver: SolverKind,
    pub iterations: usize,
    pub converged: bool,
    pub history: ConvergenceHistory,
}

pub const HISTORY_HEADER: &str = "iter,solver,s_norm_error,residual";

/// Uzawa error histories in the `S`-norm for several spatial solvers on the
/// 2D problem of [`table2_problem`].
pub fn run_history(h: f64, steps: usize, kinds: &[SolverKind], omega: f64, tol: f64) -> Result<Vec<HistoryCurve>> {
    let spec = table2_problem(h, steps)?;
    let system = TimeGlobalSystem::new(spec.clone()).with_exact_solvers()?;
    let reference = Arc::new(sequential_euler_solve(&spec)?);
    kinds
        .iter()
        .map(|&kind| {
            let pc = build_preconditioners(&spec, kind)?;
            let cfg = UzawaConfig {
                omega,
                tol,
                max_iter: 200,
                stopping: Stopping::SNormError,
                reference: Some(reference.clone()),
                ..Default::default()
            };
            let out = uzawa_solve(&system, &pc.a_tilde, &pc.h_tilde, &cfg, None)?;
            Ok(HistoryCurve { solver: kind, iterations: out.iterations, converged: out.converged, history: out.history })
        })
        .collect()
}

pub fn history_csv(curves: &[HistoryCurve]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for c in curves {
        for r in &c.history.rows {
            let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.iter, c.solver, cell(r.s_norm_error), cell(r.residual));
        }
    }
    out
}

/// Measured constants and extremal eigenvalues of `H~^{-1} S` against the
/// proven interval `[gamma / (2 alpha), 3 alpha Gamma]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub alpha: f64,
    pub gamma: f64,
    pub big_gamma: f64,
    pub spectrum: Spectrum,
    pub bound_lo: f64,
    pub bound_hi: f64,
    pub pass: bool,
}

pub const SPECTRAL_HEADER: &str = "alpha,gamma,Gamma,lam_lo,lam_hi,bound_lo,bound_hi,pass";

/// Absolute slack on the spectral bounds.
pub const SPECTRAL_SLACK: f64 = 1e-8;

/// Extremal `(gamma, Gamma)` over all frequencies `k` of the pencils
/// `(H_k A^{-1} H_k, H~_k A^{-1} H~_k)`; exactly one for direct solvers.
pub fn measure_gamma(schur: &SchurPreconditioner) -> Result<(f64, f64)> {
    if schur.kind().is_direct() {
        return Ok((1.0, 1.0));
    }
    let opts = LanczosOptions { max_iter: schur.dim().min(400), tol: 1e-12, seed: 0x5eed };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..schur.steps() {
        let (g, big) = estimate_gamma_gamma(&schur.h_k(k)?, schur.solver(k), schur.a_ref(), &opts)?;
        lo = lo.min(g);
        hi = hi.max(big);
    }
    Ok((lo, hi))
}

/// Checks the spectral equivalence of `S` and `H~` on one problem.
pub fn spectral_check(spec: &ProblemSpec, kind: SolverKind, dense_limit: usize) -> Result<SpectralReport> {
    let system = TimeGlobalSystem::new(spec.clone()).with_exact_solvers()?;
    let hierarchy = match kind {
        SolverKind::Multigrid { .. } => hierarchy_for(spec)?,
        _ => None,
    };
    let schur = SchurPreconditioner::build(spec, kind, hierarchy.as_ref())?;
    let (gamma, big_gamma) = measure_gamma(&schur)?;
    let spectrum = preconditioned_spectrum(&system, &schur, dense_limit, &spectrum_lanczos_options())?;
    let alpha = spec.alpha();
    let bound_lo = gamma / (2.0 * alpha);
    let bound_hi = 3.0 * alpha * big_gamma;
    let pass = spectrum.lambda_min >= bound_lo - SPECTRAL_SLACK && spectrum.lambda_max <= bound_hi + SPECTRAL_SLACK;
    Ok(SpectralReport { alpha, gamma, big_gamma, spectrum, bound_lo, bound_hi, pass })
}

pub fn run_spectral_check(cfg: &ExperimentConfig) -> Result<SpectralReport> {
    let spec = cfg.problem(cfg.h_or(0.125), cfg.steps_or(16))?;
    spectral_check(&spec, cfg.solver, cfg.dense_limit)
}

pub fn spectral_csv(r: &SpectralReport) -> String {
    format!(
        "{SPECTRAL_HEADER}\n{},{},{},{},{},{},{},{}\n",
        fmt_f64(r.alpha),
        fmt_f64(r.gamma),
        fmt_f64(r.big_gamma),
        fmt_f64(r.spectrum.lambda_min),
        fmt_f64(r.spectrum.lambda_max),
        fmt_f64(r.bound_lo),
        fmt_f64(r.bound_hi),
        r.pass
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub threads: usize,
    pub iterations: usize,
    pub time_per_iter: f64,
    pub total_time: f64,
    pub fft_share: f64,
    pub spatial_share: f64,
}

pub const SCALING_HEADER: &str = "threads,time_per_iter,total_time,fft_share,spatial_share";

/// Timed repetitions per thread count, after one warm-up.
pub const SCALING_REPEATS: usize = 5;

/// Thread scaling of the Uzawa solve: for each pool size, the median of
/// [`SCALING_REPEATS`] timed solves after a warm-up.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<Vec<ScalingRow>> {
    let spec = cfg.problem(cfg.h_or(1.0 / 128.0), cfg.steps_or(1024))?;
    let system = TimeGlobalSystem::new(spec.clone()).with_exact_solvers()?;
    let kind = match cfg.solver {
        SolverKind::Direct => SolverKind::mg(cfg.vcycles.unwrap_or(1)),
        k => k,
    };
    let pc = build_preconditioners(&spec, kind)?;
    let ucfg = UzawaConfig { omega: cfg.omega, tol: cfg.tol.unwrap_or(1e-8), max_iter: cfg.max_iter, ..Default::default() };
    let threads = cfg.threads.clone().unwrap_or_else(|| vec![1, 2, 4, 8]);
    let mut rows = Vec::new();
    for &t in &threads {
        if t == 0 {
            return Err(Error::InvalidInput("thread counts must be positive".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut runs = Vec::with_capacity(SCALING_REPEATS);
        for rep in 0..=SCALING_REPEATS {
            let out = pool.install(|| uzawa_solve(&system, &pc.a_tilde, &pc.h_tilde, &ucfg, None))?;
            let last = out.history.rows.last().copied().ok_or_else(|| Error::InvalidInput("empty history".into()))?;
            if rep > 0 {
                runs.push((last.wall_seconds, last.fft_seconds, last.spatial_seconds, out.iterations));
            }
        }
        runs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (total, fft, spatial, iterations) = runs[runs.len() / 2];
        rows.push(ScalingRow {
            threads: t,
            iterations,
            time_per_iter: total / iterations.max(1) as f64,
            total_time: total,
            fft_share: fft / total,
            spatial_share: spatial / total,
        });
    }
    Ok(rows)
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = format!("{SCALING_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.threads,
            fmt_f64(r.time_per_iter),
            fmt_f64(r.total_time),
            fmt_f64(r.fft_share),
            fmt_f64(r.spatial_share)
        );
    }
    out
}
