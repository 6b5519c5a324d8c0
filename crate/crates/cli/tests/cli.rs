use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn evoq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evoq"))
        .args(args)
        .env("EVOQ_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn heat_small_verify_passes_with_tight_duality_residual() {
    let cfg = config("heat_small.toml");
    let out = evoq(&["--json", "verify", "--config", cfg.to_str().unwrap(), "--suite", "duality"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_stdout(&out);
    let residual = report["measured"]["duality_residual"].as_f64().unwrap();
    assert!(residual < 1e-10, "duality residual {residual}");
    assert!(report["certificate"]["c_est"].as_f64().unwrap() > 0.0);
}

#[test]
fn every_verify_suite_passes_on_bundled_instances() {
    for name in ["heat_small.toml", "wave_small.toml", "maxwell_small.toml"] {
        let cfg = config(name);
        for suite in ["duality", "causality", "reversal", "nu-independence"] {
            let out = evoq(&["verify", "--config", cfg.to_str().unwrap(), "--suite", suite]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "{name} {suite}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
}

#[test]
fn negative_leading_coefficient_is_rejected_as_non_coercive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        r#"
nu = 1.0
[grid]
t_min = -2.0
t_max = 2.0
n = 64
[spatial]
kind = "matrix"
a = { rows = 2, cols = 2, data = [[0, 0], [1, 0], [-1, 0], [0, 0]] }
[law]
coeffs = [{ scale = -1.0 }]
[rhs]
shape = "bump"
"#,
    );
    let out = evoq(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not coercive"), "stderr: {err}");
}

#[test]
fn schema_violations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(
        dir.path(),
        "unknown.toml",
        "nu = 1.0\nbogus = 3\n[grid]\nt_min = -1.0\nt_max = 1.0\nn = 8\n[spatial]\nkind = \"heat\"\nk = 2\n",
    );
    let out = evoq(&["solve", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let missing_csv = write_config(
        dir.path(),
        "csv.toml",
        "nu = 1.0\n[grid]\nt_min = -1.0\nt_max = 1.0\nn = 8\n[spatial]\nkind = \"heat\"\nk = 2\n[rhs]\nshape = \"csv\"\npath = \"nowhere.csv\"\n",
    );
    let out = evoq(&["solve", "--config", missing_csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_exits_with_three() {
    let out = evoq(&["solve", "--config", "/nonexistent/evoq.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unactuated_heat_reports_infeasible_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("heat_b0.toml");
    let out = evoq(&[
        "--json",
        "control",
        "--config",
        cfg.to_str().unwrap(),
        "--certify-duality",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_stdout(&out);
    assert_eq!(report["control"]["feasible"], Value::Bool(false));
    assert_eq!(report["observability"]["infinite"], Value::Bool(true));
    assert_eq!(report["duality"]["agree"], Value::Bool(true));
    for f in ["control.json", "control.csv", "observability.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn adjoint_solution_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let cfg = config("heat_b0.toml");
    let out = evoq(&["adjoint", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = evoq_core::io::read_signal(&first.join("solution")).unwrap();
    assert_eq!(sol.nu(), -1.0);
    assert_eq!(sol.len(), 64);
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("wave_small.toml");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = evoq(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        reports.push((
            fs::read(out_dir.join("report.json")).unwrap(),
            fs::read(out_dir.join("solution.csv")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn pointwise_variant_steers_to_rest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rot.toml",
        r#"
nu = 1.0
[grid]
t_min = -1.0
t_max = 2.0
n = 96
[spatial]
kind = "matrix"
a = { rows = 2, cols = 2, data = [[0, 0], [2, 0], [-2, 0], [0, 0]] }
[law]
coeffs = [{ scale = 1.0 }, { diag = [0.1, 0.0] }]
[control]
b = { rows = 2, cols = 1, data = [[1, 0], [0, 0]] }
T = 1.0
variant = "pointwise"
u0 = [[1.0, 0.0], [0.5, 0.0]]
"#,
    );
    let out = evoq(&["--json", "control", "--config", cfg.to_str().unwrap(), "--certify-duality"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_stdout(&out);
    assert_eq!(report["control"]["feasible"], Value::Bool(true));
    assert!(report["control"]["terminal_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["pointwise_certificate"]["consistent"], Value::Bool(true));
}

#[test]
fn single_criterion_runs_from_the_command_line() {
    let out = evoq(&["suite", "acceptance", "--criterion", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("criterion  7 PASS"), "{text}");
    let bad = evoq(&["suite", "acceptance", "--criterion", "11"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn csv_forcing_matches_the_named_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (t_min, t_max, n, m) = (-2.0_f64, 2.0_f64, 64usize, 5usize);
    let dt = (t_max - t_min) / n as f64;
    let mut csv = String::from("t,re_1,re_2,re_3,re_4,re_5,im_1,im_2,im_3,im_4,im_5\n");
    for j in 0..n {
        let t = t_min + j as f64 * dt;
        let v = evoq_cli::instance::bump(t, -0.5, 1.0);
        let row: Vec<String> = std::iter::once(t)
            .chain(std::iter::repeat_n(v, m))
            .chain(std::iter::repeat_n(0.0, m))
            .map(|x| format!("{x:.17e}"))
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    fs::write(dir.path().join("forcing.csv"), csv).unwrap();
    let base = fs::read_to_string(config("heat_b0.toml")).unwrap();
    let from_csv = base.replace(
        "shape = \"bump\"\ncenter = -0.5\nwidth = 1.0",
        "shape = \"csv\"\npath = \"forcing.csv\"",
    );
    assert_ne!(base, from_csv);
    let a = write_config(dir.path(), "shape.toml", &base);
    let b = write_config(dir.path(), "csv.toml", &from_csv);
    let run = |cfg: &Path| {
        let out = evoq(&["--json", "solve", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        json_stdout(&out)["summary"]["norm_ratio"].as_f64().unwrap()
    };
    let (x, y) = (run(&a), run(&b));
    assert!((x - y).abs() <= 1e-12 * x, "{x} vs {y}");
}
