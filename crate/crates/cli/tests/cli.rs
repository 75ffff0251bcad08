//! CLI contract tests: exit codes, minimal configs, output shape.

use std::path::{Path, PathBuf};
use std::process::Command;

fn decoh(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_decoh"))
        .args(args)
        .output()
        .expect("spawn decoh")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const MINIMAL_RUN: &str = r#"{
  "kind": "measurement_run",
  "model": {"n_env": 1, "couplings": [0.8]},
  "grid": {"t_start": 0.0, "t_end": 2.0, "n_steps": 40}
}"#;

#[test]
fn minimal_run_starts_coherent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", MINIMAL_RUN);
    let out = dir.path().join("out");
    let res = decoh(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let csv = std::fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,abs_r_0_1,"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0).abs() <= 1e-15, "|r_01(0)| = {}", first[1]);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"kind": "measurement_run"}"#);
    let res = decoh(&["run", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));

    let res = decoh(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn kind_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", MINIMAL_RUN);
    let res = decoh(&["sieve", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn branch_mixing_model_exits_3() {
    // Δ ≠ 0 around x rotates the pointer out of the correlated sector.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.json",
        r#"{
  "kind": "measurement_run",
  "model": {"n_env": 1, "couplings": [0.8], "delta": 0.5, "pointer_axis": "x"},
  "grid": {"t_start": 0.0, "t_end": 2.0, "n_steps": 40}
}"#,
    );
    let out = dir.path().join("out");
    let res = decoh(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn empty_sweep_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{
  "kind": "regime_sweep",
  "model": {"n_env": 2, "couplings": [0.8, 1.1], "delta": 1.0, "pointer_axis": "x"}
}"#,
    );
    let res = decoh(&["sweep", cfg.to_str().unwrap(), "--param", "lambda", "--values"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn sweep_regimes_match_library_classification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{
  "kind": "regime_sweep",
  "model": {"n_env": 2, "couplings": [0.8, 1.2], "env_energies": [0.3, 0.5],
            "delta": 1.0, "pointer_axis": "x"},
  "sieve": {"grid_size": 20, "t_probe": 0.5}
}"#,
    );
    let out = dir.path().join("out");
    let res = decoh(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "lambda",
        "--values",
        "0.01,1,100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());

    use decoh_core::models::{Axis, SpinBath};
    use decoh_core::pointer::{classify_regime, Regime};
    let bath = SpinBath::new(vec![0.8, 1.2], vec![0.3, 0.5], 1.0, Axis::X).unwrap();
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    for (line, lambda) in csv.lines().skip(1).zip([0.01, 1.0, 100.0]) {
        let regime_label = line.split(',').nth(3).unwrap();
        let ch = bath.hamiltonian(lambda).unwrap();
        let expected = match classify_regime(&ch, (0.1, 10.0)).unwrap().regime {
            Regime::InteractionDominated => "interaction_dominated",
            Regime::Interplay => "interplay",
            Regime::SelfDominated => "self_dominated",
        };
        assert_eq!(regime_label, expected, "λ = {lambda}");
    }
}

#[test]
fn version_flag() {
    let res = decoh(&["--version"]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains(env!("CARGO_PKG_VERSION")));
}
