use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use peregrine::diagnostics::energy_es;
use peregrine::output::read_csv;
use peregrine::{Field, Grid, State};

fn peregrine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peregrine")).args(args).output().expect("binary runs")
}

fn simulate_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    peregrine(&args)
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/flat_gaussian_t0.05.csv")
}

#[test]
fn flat_gaussian_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path(), &["--scenario", "flat-gaussian", "--t-end", "0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("diagnostics.csv")).unwrap();
    let (gheader, grows) = read_csv(&golden_path()).unwrap();
    assert_eq!(header, gheader);
    assert_eq!(rows.len(), 50);
    assert_eq!(rows.len(), grows.len());
    for (r, g) in rows.iter().zip(&grows) {
        for (a, b) in r.iter().zip(g) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) || (a - b).abs() <= 1e-20, "{a} vs {b}");
        }
    }
}

#[test]
fn energies_recomputed_from_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path(), &["--scenario", "gaussian-bump", "--t-end", "0.2", "--snapshot-stride", "5"]);
    assert!(out.status.success());
    let (_, diag) = read_csv(&dir.path().join("diagnostics.csv")).unwrap();
    let grid = Grid::new(64.0, 512).unwrap();
    for step in [5usize, 10, 20] {
        let (header, rows) = read_csv(&dir.path().join("snapshots").join(format!("t_{step:06}.csv"))).unwrap();
        assert_eq!(header, ["x", "zeta", "u", "h"]);
        let col = |k: usize| Field::new(&grid, rows.iter().map(|r| r[k]).collect()).unwrap();
        let state = State::new(col(1), col(2), 0.0).unwrap();
        let row = &diag[step - 1];
        for (k, s) in [(1, 0.0), (2, 1.0)] {
            let e = energy_es(&state, s, 0.1, 0.0).unwrap();
            assert!((e - row[k]).abs() <= 1e-9 * row[k], "step {step} s = {s}: {e} vs {}", row[k]);
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(simulate_into(d, &["--scenario", "algebraic-tail", "--t-end", "0.03", "--seed", "5"]).status.success());
    }
    assert_eq!(fs::read(a.join("diagnostics.csv")).unwrap(), fs::read(b.join("diagnostics.csv")).unwrap());
    for name in ["t_000000.csv", "t_000003.csv"] {
        assert_eq!(
            fs::read(a.join("snapshots").join(name)).unwrap(),
            fs::read(b.join("snapshots").join(name)).unwrap()
        );
    }
}

#[test]
fn rest_writes_ten_rows_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path(), &["--scenario", "rest"]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(header.join(","), "t,E_s0,E_s1,entropy_H,orlicz,min_h,balance_residual,ineq_slack,sup_zeta,sup_u,sup_ux");
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[1] == 0.0 && r[3] == 0.0 && r[5] == 1.0));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 2024);
    assert_eq!(meta["steps"], 10);
    assert_eq!(meta["scenario"]["name"], "rest");
    assert!(meta["abort"].is_null());
}

#[test]
fn vacuum_start_aborts_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_into(dir.path(), &["--scenario", "vacuum-start"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ABORT_POSITIVITY"));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("meta.json")).unwrap()).unwrap();
    assert!(meta["abort"].as_str().unwrap().starts_with("ABORT_POSITIVITY"));
    assert_eq!(meta["steps"], 0);
}

#[test]
fn output_root_from_environment() {
    let root = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_peregrine"))
        .args(["simulate", "--scenario", "rest", "--out", "nested/run"])
        .env("PEREGRINE_OUT_ROOT", root.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(root.path().join("nested/run/diagnostics.csv").exists());
    let default = Command::new(env!("CARGO_BIN_EXE_peregrine"))
        .args(["simulate", "--scenario", "rest"])
        .env("PEREGRINE_OUT_ROOT", root.path())
        .output()
        .unwrap();
    assert!(default.status.success());
    assert!(root.path().join("simulate/rest/meta.json").exists());
}

#[test]
fn config_file_runs_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
[run]
scenario = "flat-gaussian"
seed = 9
[params]
t_end = 0.01
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = peregrine(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    assert!(meta["config"].as_str().unwrap().contains("t_end = 0.01"));
    assert_eq!(read_csv(&out_dir.join("diagnostics.csv")).unwrap().1.len(), 10);
}

#[test]
fn usage_and_config_errors_exit_two() {
    assert_eq!(peregrine(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(peregrine(&["simulate", "--scenario", "nope"]).status.code(), Some(2));
    assert_eq!(peregrine(&["simulate", "--scenario", "rest", "--points", "100"]).status.code(), Some(2));
    assert_eq!(peregrine(&["simulate", "--scenario", "rest", "--dt", "10"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[run]\nunknown_key = 1\n").unwrap();
    assert_eq!(peregrine(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn list_scenarios_names_every_scenario() {
    let out = peregrine(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["rest", "flat-gaussian", "gaussian-bump", "two-bumps", "ridge", "plane-wave", "algebraic-tail", "vacuum-start", "dimple", "spike"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn verify_elliptic_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = peregrine(&["verify-elliptic", "--preset", "ridge", "--samples", "10", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("elliptic.json")).unwrap()).unwrap();
    assert_eq!(report[0]["preset"], "ridge");
    assert!(report[0]["residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn verify_entropy_passes_on_bump_and_fails_honestly_on_rough_data() {
    let dir = tempfile::tempdir().unwrap();
    let ok = peregrine(&["verify-entropy", "--scenario", "gaussian-bump", "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let rough = peregrine(&["verify-entropy", "--scenario", "dimple", "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(rough.status.code(), Some(1));
    let bp = peregrine(&["verify-entropy", "--scenario", "algebraic-tail"]);
    assert_eq!(bp.status.code(), Some(2));
}
