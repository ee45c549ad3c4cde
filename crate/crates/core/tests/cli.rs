use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mildhjb");

const SCALAR: &str = r#"{
  "model": {"dim": 1, "alpha": [1.0], "q": [1.0], "g": [1.0]},
  "seed": 5,
  "semigroup": {"t": 0.5, "function": {"kind": "sin", "k": [1.0]}, "points": [[0.0], [0.5], [1.0]]},
  "grad": {"t": 0.5, "function": {"kind": "sin", "k": [1.0]}, "points": [[0.3], [1.0]], "direction": [1.0], "paths": 100000},
  "solve": {"lambda": 2.0, "hamiltonian": {"kind": "constant", "c": 3.0}, "x_max": 2.0, "nodes": 5},
  "simulate": {"x0": [1.0], "t": 1.0, "dt": 0.1, "paths": 1000, "write_paths": true}
}"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn semigroup_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SCALAR, &["semigroup", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let err = csv_column(&dir.path().join("o/semigroup.csv"), "abs_error");
    assert!(err.iter().all(|e| *e < 1e-10), "{err:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn constant_solve_gives_c_over_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SCALAR, &["solve", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let u = csv_column(&dir.path().join("o/u.csv"), "u");
    assert!(u.iter().all(|v| (v - 1.5).abs() < 1e-8), "{u:?}");
}

#[test]
fn grad_exact_and_bel_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SCALAR, &["grad", "--method", "both", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("o/grad.csv");
    let (exact, bel, se) = (
        csv_column(&path, "exact"),
        csv_column(&path, "bel"),
        csv_column(&path, "bel_stderr"),
    );
    for i in 0..exact.len() {
        assert!((exact[i] - bel[i]).abs() <= 3.0 * se[i]);
    }
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), SCALAR, &["simulate", "--out", "a", "--threads", "1"]);
    let b = run(dir.path(), SCALAR, &["simulate", "--out", "b", "--threads", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    for file in ["summary.csv", "paths.bin"] {
        let x = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), SCALAR, &["simulate", "--out", "a"]);
    run(dir.path(), SCALAR, &["simulate", "--out", "b", "--seed", "6"]);
    let x = std::fs::read(dir.path().join("a/summary.csv")).unwrap();
    let y = std::fs::read(dir.path().join("b/summary.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn failing_certificate_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let alpha: Vec<String> = (1..=50).map(|n| format!("{n}.0")).collect();
    let config = format!(
        r#"{{"model": {{"dim": 50, "alpha": [{a}], "q": [{q}], "g": [{q}],
            "rates": {{"alpha": {{"coef": 1.0, "power": 1.0}}, "q": {{"coef": 1.0, "power": 0.0}}, "g": {{"coef": 1.0, "power": 0.0}}}}}}}}"#,
        a = alpha.join(","),
        q = vec!["1.0"; 50].join(",")
    );
    let out = run(dir.path(), &config, &["certify", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/certificate.json").exists());
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "{\"model\": ", &["certify", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);
    assert!(dir.path().join("o/error.json").exists());

    let out = run(
        dir.path(),
        r#"{"model": {"dim": 1, "alpha": [1.0], "q": [1.0], "g": [1.0]}, "lamda": 2}"#,
        &["certify"],
    );
    assert_eq!(out.status.code(), Some(2));

    let out = run(dir.path(), SCALAR, &["solve", "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(BIN).arg("solve").current_dir(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn subcritical_discount_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = SCALAR.replace(
        r#""hamiltonian": {"kind": "constant", "c": 3.0}"#,
        r#""hamiltonian": {"kind": "sin-tanh", "a": 1.0, "b": 1.0, "c": 0.0}"#,
    );
    let out = run(dir.path(), &config, &["solve", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, SCALAR).unwrap();
    let out = Command::new(BIN)
        .args(["semigroup", "--out", "o", "--config"])
        .arg(&cfg)
        .env("MILDHJB_THREADS", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 3);
}
