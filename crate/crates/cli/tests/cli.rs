use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_steadygrad"))
        .args(&args[..1])
        .arg("--config")
        .arg(&cfg)
        .args(&args[1..])
        .env("THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn malformed_rho0_trace_exits_with_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "delta = 0.1\nrho0 = 0.6, 0, 0, 0.6\n", &["steady"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("trace") && err.contains("line 2"), "{err}");
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "temperature = 300\n", &["steady"]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_steadygrad"))
        .args(["steady", "--config", "/nonexistent/run.cfg"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn steady_reports_both_methods_and_agrees() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "delta = 0.1\n", &["steady"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("time-integration,"));
    assert!(lines[2].starts_with("null-space,"));
    let sz = |l: &str| l.split(',').nth(9).unwrap().parse::<f64>().unwrap();
    assert!((sz(lines[1]) - sz(lines[2])).abs() < 1e-8);
    let tr = |l: &str| {
        let f: Vec<f64> = l.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        f[0] + f[6]
    };
    assert!((tr(lines[1]) - 1.0).abs() < 1e-10);
}

#[test]
fn steady_at_zero_tunnelling_prints_both_diagnostics() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "# reference bath, no tunnelling\n", &["steady"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("degenerate"), "{err}");
    assert!(err.contains("value from rho0 = 0.5"), "{err}");
    assert!(err.contains("tanh"), "{err}");
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 2);
    let sz: f64 = csv.lines().nth(1).unwrap().split(',').nth(9).unwrap().parse().unwrap();
    assert!((sz - 0.5).abs() < 1e-8);
}

#[test]
fn sweep_with_two_steps_writes_two_rows_to_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(
        dir.path(),
        "delta = 0.1\n",
        &["sweep", "--param", "beta", "--from", "0.1", "--to", "0.5", "--steps", "2", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param_name,param_value,expectation,grad_implicit,grad_fd");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("beta,1.0000000000000001e-1,"));
    assert!(lines[2].starts_with("beta,5.0000000000000000e-1,"));
}

#[test]
fn sweep_keeps_going_past_failed_points() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        "delta = 0.1\n",
        &["sweep", "--param", "eta", "--from", "-0.01", "--to", "0.01", "--steps", "3"],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains("NaN"));
    assert!(!rows[2].contains("NaN"));
    assert!(stderr(&o).contains("eta = -0.01"));
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "", &["sweep", "--param", "gamma", "--from", "0", "--to", "1", "--steps", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grad_prints_counters_and_one_row_per_free_parameter() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "delta = 0.1\nfree = beta, eta, delta\n", &["grad"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("steady_solves=1 adjoint_solves=1"), "{err}");
    let csv = stdout(&o);
    let names: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["beta", "eta", "delta"]);
    assert_eq!(csv.lines().next().unwrap(), "param_name,param_value,expectation,gradient,method");
}

#[test]
fn grad_with_everything_frozen_has_no_rows() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "delta = 0.1\nfree = none\n", &["grad"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(stderr(&o).contains("observable = -"));
}

#[test]
fn grad_backends_agree_through_the_binary() {
    let dir = TempDir::new().unwrap();
    let grads = |method: &str| -> Vec<f64> {
        let o = run(dir.path(), "delta = 0.3\nbeta = 0.4\n", &["grad", "--grad-method", method]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o).lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect()
    };
    let (a, b) = (grads("direct"), grads("adjoint-ode"));
    assert_eq!(a.len(), 6);
    for (x, y) in a.iter().zip(&b) {
        // Relative agreement above the adjoint solve tolerance.
        assert!((x - y).abs() <= 1e-6 * x.abs() + 1e-12, "{x} vs {y}");
    }
}

#[test]
fn grad_at_zero_tunnelling_exits_with_degeneracy_code() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "free = beta\n", &["grad"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("degenerate"));
}

#[test]
fn optimize_with_zero_iterations_writes_only_initial_rows() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "", &["optimize", "--target", "-0.004", "--iters", "0", "--seeds", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "seed,iteration,epsilon,delta,expectation,loss");
    assert_eq!(lines.len(), 4);
    for (k, l) in lines[1..].iter().enumerate() {
        assert!(l.starts_with(&format!("{k},0,")), "{l}");
    }
}

#[test]
fn optimize_with_fixed_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let args = ["optimize", "--target", "-0.004", "--iters", "15", "--seeds", "2", "--seed", "9"];
    let a = run(dir.path(), "", &args);
    let b = run(dir.path(), "", &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 1 + 2 * 16);
}

#[test]
fn optimize_needs_a_target() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "", &["optimize"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("target"));
}
