use std::process::Command;

use pathspace_cli::{main_with, Report};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pathspace"));
    c.env_remove(pathspace_cli::OUT_DIR_ENV);
    c
}

/// Runs in-process and returns `(status, stdout, stderr)`.
fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["pathspace"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn beta_at_one_is_e_squared() {
    let (code, out, _) = run(&["rates", "beta", "--c3", "1", "--delta1", "0.25", "--delta2", "0.5", "--r", "1"]);
    assert_eq!(code, 0);
    let report = Report::parse_json_lines(&out).unwrap();
    let row = &report.payload.results[0];
    assert!((row.lhs.unwrap() - std::f64::consts::E.powi(2)).abs() < 1e-12);
}

#[test]
fn haar_gram_is_the_identity() {
    let (code, out, _) = run(&["haar", "gram", "--level", "4", "--steps", "128"]);
    assert_eq!(code, 0);
    let report = Report::parse_json_lines(&out).unwrap();
    let row = report.payload.results.iter().find(|r| r.id == "gram-deviation").unwrap();
    assert!(row.lhs.unwrap() < 1e-12);
    assert_eq!(report.payload.tables["gram"].rows.len(), 32 * 32);
}

#[test]
fn exit_statuses() {
    let status = |args: &[&str]| bin().args(args).output().unwrap().status.code().unwrap();
    assert_eq!(status(&["haar", "gram", "--level", "3", "--steps", "64"]), 0);
    assert_eq!(status(&["diffusion", "check", "--eigen-delta", "0", "--draws", "50"]), 1);
    assert_eq!(status(&["verify", "lsi", "--paths", "50"]), 2);
    assert_eq!(status(&["verify", "lsi", "--manifold", "torus"]), 2);
    assert_eq!(status(&["haar", "gram", "--out", "/nonexistent-dir/x.jsonl"]), 3);
    assert_eq!(status(&["frobnicate"]), 2);
}

#[test]
fn config_file_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# comment\nsteps = 64\n\npaths = many\n").unwrap();
    let (code, _, err) = run(&["haar", "gram", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("run.conf:4") && err.contains("\"paths\""), "{err}");
    std::fs::write(&path, "colour = blue\n").unwrap();
    let (code, _, err) = run(&["haar", "gram", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains(":1") && err.contains("\"colour\""), "{err}");
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "level = 3\nsteps = 64 # coarse\n").unwrap();
    let (code, out, _) = run(&["haar", "gram", "--level", "5", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let report = Report::parse_json_lines(&out).unwrap();
    assert_eq!(report.payload.config.level, 3);
    assert_eq!(report.payload.config.steps, 64);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["rates", "beta", "--r", "0.5,1,2", "--format", "csv"])
        .env(pathspace_cli::OUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let main = std::fs::read_to_string(dir.path().join("rates-beta.csv")).unwrap();
    let rows = pathspace_cli::report::parse_results_csv(&main).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(dir.path().join("rates-beta.beta.csv").exists());
}

#[test]
fn failed_write_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.jsonl");
    let (code, _, _) = run(&["verify", "lsi", "--paths", "10", "--out", target.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("alpha.jsonl");
    let (code, out, _) = run(&["rates", "alpha", "--delta1", "0.25", "--delta2", "0.5", "--out", target.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    let report = Report::parse_json_lines(&text).unwrap();
    assert_eq!(report.to_json_lines().unwrap(), text);
    assert_eq!(report.payload.command, "rates alpha");
    assert!(report.payload.results.iter().any(|r| r.id == "alpha-exponent" && r.pass));
}

#[test]
fn verify_payload_is_independent_of_workers() {
    let payload = |workers: &str| {
        let (code, out, _) = run(&[
            "verify", "poincare", "--manifold", "logsurface:1,0.5", "--paths", "300", "--steps", "64", "--seed", "9",
            "--workers", workers,
        ]);
        assert!(code == 0 || code == 1);
        out.lines().next().unwrap().to_string()
    };
    assert_eq!(payload("1"), payload("3"));
}

#[test]
fn simulate_dumps_paths() {
    let (code, out, _) = run(&["simulate", "--paths", "100", "--steps", "8", "--manifold", "sphere2"]);
    assert_eq!(code, 0);
    let report = Report::parse_json_lines(&out).unwrap();
    let t = &report.payload.tables["paths"];
    assert_eq!(t.rows.len(), 100 * 9);
    assert_eq!(t.columns[..3], ["path", "step", "t"]);
}
