//! `parauzawa` command-line driver.
//!
//! Exit status: 0 success, 1 input error, 2 bound or invariant violation,
//! 3 solver divergence or non-convergence.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parauzawa::experiments::{self, ExperimentConfig};
use parauzawa::spatial::SolverKind;
use parauzawa::Error;

#[derive(Parser, Debug)]
#[command(name = "parauzawa", version, about = "Time-parallel inexact Uzawa solver for the heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and print its convergence history.
    Solve(Flags),
    /// Extremal eigenvalues of H^{-1} S for the 1D heat equation.
    Table1(Flags),
    /// Uzawa iteration counts for the 2D heat equation with multigrid.
    Table2(Flags),
    /// S-norm error histories for direct, mg(1) and mg(2) spatial solvers.
    History(Flags),
    /// Check the spectral bounds between S and the Schur preconditioner.
    SpectralCheck(Flags),
    /// Thread scaling of the Uzawa solve.
    Scaling(Flags),
}

/// Flags shared by all subcommands; they override values from `--config`.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Mesh size, or a comma-separated list (`0.125` or `1/8`).
    #[arg(long = "h")]
    h: Option<String>,
    /// Number of time steps, or a comma-separated list.
    #[arg(long = "N")]
    n: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    t: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// direct, jacobi(k) or mg(k).
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    vcycles: Option<String>,
    /// Thread count, or a comma-separated list for `scaling`.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<String>,
    /// Flat key = value file with the same keys as the long flags.
    #[arg(long)]
    config: Option<String>,
    /// 1 or 2.
    #[arg(long)]
    space: Option<String>,
    /// uzawa or minres.
    #[arg(long)]
    method: Option<String>,
    /// residual or snorm.
    #[arg(long)]
    stopping: Option<String>,
    /// uniform or perturbed:EPS.
    #[arg(long)]
    grid: Option<String>,
    /// constant:C, step:BEFORE,AFTER,SWITCH or sin:MEAN,AMP,FREQ.
    #[arg(long)]
    coefficient: Option<String>,
    /// sine, manufactured, random or zero.
    #[arg(long)]
    data: Option<String>,
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    /// Largest dimension handled by the dense eigensolver.
    #[arg(long = "dense-limit")]
    dense_limit: Option<String>,
}

enum Failure {
    Input(String),
    Bound(String),
    Divergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } => Failure::Divergence(e.to_string()),
            Error::NotPositiveDefinite(_) | Error::IndefinitePreconditioner(_) => Failure::Bound(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl Flags {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&fs::read_to_string(path)?)?;
        }
        // seed first so that `data = random` picks it up regardless of order
        let pairs = [
            ("seed", &self.seed),
            ("space", &self.space),
            ("h", &self.h),
            ("N", &self.n),
            ("T", &self.t),
            ("omega", &self.omega),
            ("tol", &self.tol),
            ("solver", &self.solver),
            ("vcycles", &self.vcycles),
            ("threads", &self.threads),
            ("out", &self.out),
            ("method", &self.method),
            ("stopping", &self.stopping),
            ("grid", &self.grid),
            ("coefficient", &self.coefficient),
            ("data", &self.data),
            ("max_iter", &self.max_iter),
            ("dense_limit", &self.dense_limit),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn require(cfg: &ExperimentConfig, what: &str) -> Result<(), Failure> {
    let missing = match what {
        "h" => cfg.h.is_none(),
        _ => cfg.steps.is_none(),
    };
    if missing {
        let flag = if what == "h" { "--h" } else { "--N" };
        return Err(Failure::Input(format!("missing required flag {flag}")));
    }
    Ok(())
}

fn set_global_threads(cfg: &ExperimentConfig) -> Result<(), Failure> {
    if let Some(&t) = cfg.threads.as_ref().and_then(|v| v.first()) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Input(format!("cannot configure {t} threads: {e}")))?;
    }
    Ok(())
}

fn emit(cfg: &ExperimentConfig, csv: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(path) => fs::write(path, csv).map_err(|e| Failure::Input(format!("cannot write {path}: {e}"))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let (flags, name) = match &command {
        Command::Solve(f) => (f, "solve"),
        Command::Table1(f) => (f, "table1"),
        Command::Table2(f) => (f, "table2"),
        Command::History(f) => (f, "history"),
        Command::SpectralCheck(f) => (f, "spectral-check"),
        Command::Scaling(f) => (f, "scaling"),
    };
    let cfg = flags.config()?;
    if name != "scaling" {
        set_global_threads(&cfg)?;
    }
    match name {
        "solve" => {
            require(&cfg, "h")?;
            require(&cfg, "N")?;
            let report = experiments::run_solve(&cfg)?;
            emit(&cfg, &report.outcome.history.to_csv())?;
            if !report.outcome.converged {
                return Err(Failure::Divergence(format!(
                    "no convergence within {} iterations",
                    report.outcome.iterations
                )));
            }
            eprintln!("converged in {} iterations ({:.3} s)", report.outcome.iterations, report.seconds);
            Ok(())
        }
        "table1" => {
            let h = cfg.h.clone().unwrap_or_else(|| vec![1.0 / 64.0, 1.0 / 128.0]);
            let n = cfg.steps.clone().unwrap_or_else(|| (2..=10).map(|k| 1usize << k).collect());
            let rows = experiments::run_table1(&h, &n, cfg.dense_limit)?;
            emit(&cfg, &experiments::table1_csv(&rows))
        }
        "table2" => {
            let h = cfg.h.clone().unwrap_or_else(|| vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]);
            let n = cfg.steps.clone().unwrap_or_else(|| vec![128, 256, 512, 1024]);
            let rows = experiments::run_table2(&h, &n, cfg.vcycles.unwrap_or(1), cfg.omega, cfg.tol.unwrap_or(1e-6))?;
            emit(&cfg, &experiments::table2_csv(&rows))?;
            if let Some(r) = rows.iter().find(|r| !r.converged) {
                return Err(Failure::Divergence(format!("h = {}, N = {} did not converge", r.h, r.steps)));
            }
            Ok(())
        }
        "history" => {
            let kinds = [SolverKind::Direct, SolverKind::mg(1), SolverKind::mg(2)];
            let curves = experiments::run_history(
                cfg.h_or(1.0 / 64.0),
                cfg.steps_or(512),
                &kinds,
                cfg.omega,
                cfg.tol.unwrap_or(1e-6),
            )?;
            emit(&cfg, &experiments::history_csv(&curves))
        }
        "spectral-check" => {
            require(&cfg, "h")?;
            require(&cfg, "N")?;
            let report = experiments::run_spectral_check(&cfg)?;
            emit(&cfg, &experiments::spectral_csv(&report))?;
            if !report.pass {
                return Err(Failure::Bound(format!(
                    "eigenvalues [{}, {}] leave [{}, {}]",
                    report.spectrum.lambda_min, report.spectrum.lambda_max, report.bound_lo, report.bound_hi
                )));
            }
            Ok(())
        }
        _ => {
            let rows = experiments::run_scaling(&cfg)?;
            emit(&cfg, &experiments::scaling_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}\n\nRun `parauzawa <COMMAND> --help` for usage.");
            ExitCode::from(1)
        }
        Err(Failure::Bound(msg)) => {
            eprintln!("bound violation: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Divergence(msg)) => {
            eprintln!("divergence: {msg}");
            ExitCode::from(3)
        }
    }
}
