use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use extham_core::phase_space::{ParameterKind, Trajectory};
use serde_json::Value;

fn extham(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extham"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn kepler_circular_simulation_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let json = dir.path().join("report.json");
    let out = extham(&[
        "simulate",
        "--q",
        "1,0",
        "--p",
        "0,1",
        "--span",
        "62.83185307179586",
        "--out-csv",
        path_str(&csv),
        "--out-report",
        path_str(&json),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let header = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "param,t,e,q1,q2,p1,p2,He_residual");
    let traj = Trajectory::read_csv(
        std::io::BufReader::new(fs::File::open(&csv).unwrap()),
        ParameterKind::EvolutionS,
    )
    .unwrap();
    assert!(traj.len() > 60_000);

    let r = report(&json);
    assert_eq!(r["passed"], true);
    let drift = r["drift"].as_array().unwrap();
    let l = drift
        .iter()
        .find(|d| d["quantity"] == "angular-momentum")
        .unwrap();
    assert!(l["max_abs_deviation"].as_f64().unwrap() <= 1e-8);
    // the report carries the resolved configuration, defaults included
    assert_eq!(r["config"]["stepper"]["method"], "rk4");
    assert_eq!(r["config"]["seed"], 42);
}

#[test]
fn relativistic_free_particle_clock_rate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rel.csv");
    let json = dir.path().join("rel.json");
    let out = extham(&[
        "simulate",
        "--system",
        "relativistic",
        "--p",
        "0.6,0.8",
        "--span",
        "2",
        "--out-csv",
        path_str(&csv),
        "--out-report",
        path_str(&json),
    ]);
    assert_eq!(code(&out), 0);
    let traj = Trajectory::read_csv(
        std::io::BufReader::new(fs::File::open(&csv).unwrap()),
        ParameterKind::EvolutionS,
    )
    .unwrap();
    for s in traj.samples() {
        assert!((s.state.t - std::f64::consts::SQRT_2 * s.param).abs() <= 1e-12);
    }
    let rate = report(&json)["simulation"]["mean_dt_dparam"].as_f64().unwrap();
    assert!((rate - std::f64::consts::SQRT_2).abs() <= 1e-12);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    let json = dir.path().join("report.json");
    fs::write(
        &cfg,
        r#"{"system": "kepler", "span": 100.0, "param": "t", "stepper": {"step": 0.01}}"#,
    )
    .unwrap();
    let out = extham(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--span",
        "1",
        "--out-report",
        path_str(&json),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&json);
    assert_eq!(r["config"]["span"], 1.0);
    assert_eq!(r["config"]["param"], "t");
    assert_eq!(r["config"]["stepper"]["step"], 0.01);
    assert_eq!(r["simulation"]["samples"], 101);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"sytem": "kepler"}"#).unwrap();
    for args in [
        vec!["simulate", "--span", "0"],
        vec!["simulate", "--system", "pendulum"],
        vec!["simulate", "--mu", "cos:1"],
        vec!["simulate", "--q", "1,0,0"],
        vec!["bracket", "--invariant", "momentum"],
        vec!["simulate", "--config", bad.to_str().unwrap()],
        vec!["simulate", "--config", "/definitely/missing.json"],
        vec!["check", "--criterion", "0"],
        vec!["frobnicate"],
    ] {
        let out = extham(&args);
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn numerical_failure_exits_3() {
    let out = extham(&["simulate", "--q", "0,0", "--p", "1,0"]);
    assert_eq!(code(&out), 3);
    let out = extham(&["simulate", "--q", "5e-4,0", "--p", "-1,0", "--span", "1"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bracket_reports_scan_statistics() {
    let out = extham(&[
        "bracket",
        "--invariant",
        "runge-lenz",
        "--samples",
        "100",
        "--seed",
        "42",
        "--scheme",
        "fd",
    ]);
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let b = &r["brackets"][0];
    assert!(b["max"].as_f64().unwrap() <= 1e-5);
    assert_eq!(b["count"], 100);
    assert_eq!(b["failures"], 0);
    assert!(b["mean"].as_f64().unwrap() <= b["max"].as_f64().unwrap());

    // same seed, same numbers
    let again: Value = serde_json::from_slice(
        &extham(&[
            "bracket",
            "--invariant",
            "runge-lenz",
            "--samples",
            "100",
            "--seed",
            "42",
            "--scheme",
            "fd",
        ])
        .stdout,
    )
    .unwrap();
    assert_eq!(r, again);
}

#[test]
fn bracket_failures_exit_1() {
    let out = extham(&[
        "bracket",
        "--system",
        "kepler-timedep",
        "--invariant",
        "runge-lenz",
    ]);
    assert_eq!(code(&out), 1);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["brackets"][0]["max"].as_f64().unwrap() > 1e-3);

    let out = extham(&["bracket", "--invariant", "q1", "--scheme", "fd"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn symmetry_rotation_by_a_quarter_turn() {
    let out = extham(&[
        "symmetry",
        "--invariant",
        "angular-momentum",
        "--state",
        "1,0,0,1.2",
        "--eps",
        "1.5707963267948966",
        "--mode",
        "finite",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let y = &r["symmetry"][0]["transformed"];
    let q: Vec<f64> = serde_json::from_value(y["q"].clone()).unwrap();
    let p: Vec<f64> = serde_json::from_value(y["p"].clone()).unwrap();
    // (1, 0) -> (0, -1) and (0, 1.2) -> (1.2, 0)
    for (a, b) in q.iter().chain(&p).zip([0.0, -1.0, 1.2, 0.0]) {
        assert!((a - b).abs() <= 1e-9, "{q:?} {p:?}");
    }
}

#[test]
fn symmetry_runge_lenz_extended_decomposition() {
    let out = extham(&[
        "symmetry",
        "--invariant",
        "runge-lenz-extended",
        "--state",
        "1,0,0,1",
        "--eps",
        "1e-3",
    ]);
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let entry = &r["symmetry"][0];
    assert_eq!(entry["delta"]["dt"].as_f64().unwrap(), 1e-3);
    let sr = &entry["scaled_rotation"];
    assert_eq!(sr["dt"].as_f64().unwrap(), 1e-3);
    assert_eq!(sr["dphi"].as_f64().unwrap(), 0.0);
    assert_eq!(sr["dpsi"].as_f64().unwrap(), 1e-3);
}

#[test]
fn symmetry_he_generator_commutes_with_dynamics() {
    let out = extham(&[
        "symmetry",
        "--invariant",
        "hamiltonian",
        "--eps",
        "0.5",
        "--mode",
        "finite",
        "--delta-s",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["symmetry"][0]["commutation_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn check_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("check.json");
    let out = extham(&["check", "--criterion", "8,10", "--out-report", path_str(&json)]);
    assert_eq!(code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("PASS  C8"), "{stderr}");
    let r = report(&json);
    assert_eq!(r["criteria"].as_array().unwrap().len(), 2);
    assert_eq!(r["passed"], true);
}
