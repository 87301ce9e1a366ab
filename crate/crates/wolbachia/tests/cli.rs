use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wolbachia"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn wolbachia")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn params_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../params/wmelpop.json")
}

const N_SHARP: f64 = 1728.815959702669;
const W_SHARP: f64 = 704.4105987365406;

#[test]
fn equilibria_from_shipped_file() {
    let out = run(&["equilibria", "--params", params_file().to_str().unwrap()]);
    let v = stdout_json(&out);
    let eq = &v["equilibria"];
    assert!((eq["n_sharp"].as_f64().unwrap() - N_SHARP).abs() < 1e-9);
    assert!((eq["e_c"]["n"].as_f64().unwrap() - 290.0714917882502).abs() < 1e-9);
    assert_eq!(v["stability"]["e_c"]["classification"], "saddle");
    assert_eq!(v["stability"]["e_n"]["classification"], "nodal_attractor");
    assert_eq!(v["stability"]["e_w"]["classification"], "nodal_attractor");
    assert_eq!(v["stability"]["e0"]["classification"], "source");
}

#[test]
fn infeasible_parameters_drop_the_saddle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(
        &path,
        r#"{"rho_n":4.55,"rho_w":2.27,"alpha_n":0.03333,"alpha_w":0.06666,"beta_n":0.01,"beta_w":0.00312792}"#,
    )
    .unwrap();
    let v = stdout_json(&run(&["equilibria", "--params", path.to_str().unwrap()]));
    assert!(v["equilibria"]["e_c"].is_null());
    assert_eq!(v["feasible"], false);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["equilibria", "--params", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["equilibria", "--params", "/no/such/file.json"]).status.code(), Some(1));
    assert_eq!(run(&["equilibria", "--format", "xml"]).status.code(), Some(1));

    let dead = dir.path().join("dead.json");
    std::fs::write(
        &dead,
        r#"{"rho_n":4.55,"rho_w":0.01,"alpha_n":0.03333,"alpha_w":0.06666,"beta_n":0.0026,"beta_w":0.0031}"#,
    )
    .unwrap();
    assert_eq!(run(&["equilibria", "--params", dead.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--n0", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["plan", "--tau", "0"]).status.code(), Some(2));

    // A solver that may not take a step long enough to progress.
    let out = run(&["simulate", "--n0", "100", "--w0", "100", "--t-max", "1", "--max-step", "1e-300"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_reaches_logistic_plateau() {
    let out = run(&["simulate", "--n0", "1728.8", "--w0", "0", "--t-max", "100", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,N,W"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 100.0);
    assert!((last[1] - N_SHARP).abs() < 1e-4 * N_SHARP);
    assert_eq!(last[2], 0.0);
}

#[test]
fn simulate_from_origin_stays_put() {
    let v = stdout_json(&run(&["simulate", "--n0", "0", "--w0", "0", "--t-max", "50"]));
    for s in v["samples"].as_array().unwrap() {
        assert_eq!((s["N"].as_f64(), s["W"].as_f64()), (Some(0.0), Some(0.0)));
    }
}

#[test]
fn simulate_above_threshold_replaces() {
    let v = stdout_json(&run(&["simulate", "--n0", "500", "--w0", "2000", "--t-max", "400"]));
    assert_eq!(v["reason"], "reached_t_max");
    let last = v["samples"].as_array().unwrap().last().unwrap();
    assert!(last["N"].as_f64().unwrap() < 1e-3);
    assert!((last["W"].as_f64().unwrap() - W_SHARP).abs() < 1e-3 * W_SHARP);
}

#[test]
fn min_release_matches_table() {
    let out = run(&["min-release", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let expect = [0.38, 0.83, 1.32, 1.85];
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for (row, e) in rows.iter().zip(expect) {
        assert!((row[3] - e).abs() <= 0.02, "{row:?} vs {e}");
    }
}

#[test]
fn plan_reproduces_daily_full_capacity_row() {
    let v = stdout_json(&run(&["plan", "--n0-frac", "1", "--tau", "1", "--budget", "12"]));
    let row = &v[0];
    assert!((row["lambda_hat_frac"].as_f64().unwrap() - 0.43).abs() <= 0.05);
    assert!((row["releases"].as_i64().unwrap() - 12).abs() <= 1);
    assert!(row["error"].is_null());
}

#[test]
fn separatrix_is_unordered() {
    let v = stdout_json(&run(&["separatrix"]));
    assert_eq!(v["provenance"], "backward-integration");
    assert_eq!(v["unordered"], true);
    let pts = v["points"].as_array().unwrap();
    for w in pts.windows(2) {
        assert!(w[0]["n"].as_f64() < w[1]["n"].as_f64());
        assert!(w[0]["w"].as_f64() <= w[1]["w"].as_f64());
    }
}

#[test]
fn impulsive_from_release_file() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("releases.json");
    std::fs::write(&list, r#"[{"t": 0, "size": 3500}]"#).unwrap();
    let v = stdout_json(&run(&["simulate-impulsive", "--n0", "1728.8", "--releases-file", list.to_str().unwrap()]));
    assert_eq!(v["outcome"], "replacement");
    assert_eq!(v["jumps"].as_array().unwrap().len(), 1);
}

#[test]
fn out_file_gets_metadata_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("thresholds.csv");
    let status = run(&["min-release", "--format", "csv", "--out", out.to_str().unwrap()]).status;
    assert!(status.success());
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("lambda,n0,w0_hat,w0_hat_frac\n"));
    let meta: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("thresholds.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "min-release");
    assert_eq!(meta["format"], "csv");
    assert_eq!(meta["params_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["tolerances"]["tol"], "1e-6");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &["equilibria"],
        &["min-release", "--format", "csv"],
        &["plan", "--n0-frac", "0.25,0.5", "--tau", "1,3", "--budget", "5"],
        &["separatrix", "--method", "bisection", "--points", "8"],
    ];
    for args in cases {
        let a = bin().args(args).env("WOLBACHIA_THREADS", "1").output().unwrap();
        let b = bin().args(args).env("WOLBACHIA_THREADS", "4").output().unwrap();
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn seed_only_changes_check_draws() {
    let a = run(&["check", "--seed", "3", "--cases", "50"]);
    let b = run(&["check", "--seed", "3", "--cases", "50"]);
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 3);
    // Analyses take no seed at all.
    assert_eq!(run(&["equilibria", "--seed", "1"]).status.code(), Some(1));
}
