use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parauzawa")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("parauzawa-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn table1_single_cell() {
    let o = run(&["table1", "--h", "0.015625", "--N", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,N,lambda_min,lambda_max,kappa"));
    let cells: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells[1], 4.0);
    assert!((cells[2] - 0.8099).abs() < 1e-3);
    assert!((cells[3] - 1.9999).abs() < 1e-3);
    assert!((cells[4] - 2.4693).abs() < 1e-3);
    assert!(lines.next().is_none());
}

#[test]
fn solve_converges_with_direct_solvers() {
    let o = run(&["solve", "--h", "0.125", "--N", "16", "--solver", "direct", "--tol", "1e-8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("iter,residual,s_norm_error,d_norm_error,wall_seconds,fft_seconds,spatial_seconds\n"));
    let last = text.lines().last().unwrap();
    let residual: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!(residual <= 1e-8);
}

#[test]
fn missing_flag_is_an_input_error() {
    let o = run(&["solve", "--h", "0.125"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--N"));
}

#[test]
fn unknown_flag_prints_usage() {
    let o = run(&["table1", "--bogus", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_is_an_input_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn malformed_values_are_input_errors() {
    assert_eq!(run(&["solve", "--h", "0.3", "--N", "4"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--h", "0.125", "--N", "4", "--solver", "lu"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--h", "0.125", "--N", "four"]).status.code(), Some(1));
}

#[test]
fn excessive_damping_reports_divergence() {
    let o = run(&["solve", "--h", "0.125", "--N", "16", "--omega", "50"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn spectral_check_passes_and_writes_file() {
    let out = scratch("spectral.csv");
    let o = run(&["spectral-check", "--h", "1/8", "--N", "8", "--solver", "mg(1)", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("alpha,gamma,Gamma,lam_lo,lam_hi,bound_lo,bound_hi,pass\n"));
    assert!(text.trim_end().ends_with(",true"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let cfg = scratch("run.cfg");
    std::fs::write(&cfg, "# small run\nh = 1/8\nN = 4\n").unwrap();
    let from_file = stdout(&run(&["table1", "--config", cfg.to_str().unwrap()]));
    assert!(from_file.lines().nth(1).unwrap().starts_with("1.2500000000000000e-1,4,"));
    let overridden = stdout(&run(&["table1", "--config", cfg.to_str().unwrap(), "--N", "8"]));
    assert!(overridden.lines().nth(1).unwrap().starts_with("1.2500000000000000e-1,8,"));

    std::fs::write(&cfg, "h = 1/8\nnonsense = 1\n").unwrap();
    assert_eq!(run(&["table1", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn table2_reduced_cell() {
    let o = run(&["table2", "--h", "0.25", "--N", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("h,N,iterations"));
    assert!(text.lines().nth(1).unwrap().starts_with("2.5000000000000000e-1,8,"));
}

#[test]
fn numeric_columns_do_not_depend_on_threads() {
    let numeric = |threads: &str| {
        let o = run(&["solve", "--h", "0.125", "--N", "32", "--solver", "mg(1)", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
            .lines()
            .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    assert_eq!(numeric("1"), numeric("3"));
}

#[test]
fn scaling_reports_each_thread_count() {
    let o = run(&["scaling", "--h", "1/16", "--N", "16", "--threads", "1,2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "threads,time_per_iter,total_time,fft_share,spatial_share");
    assert!(rows[1].starts_with("1,") && rows[2].starts_with("2,"));
}
