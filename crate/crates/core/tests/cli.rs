use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spinnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinnet")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn bound_on_partially_dark_tree() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().to_str().unwrap();
    assert_eq!(spinnet(&["fixtures", "--out", fx]).status.code(), Some(0));
    let net = dir.path().join("fig2.json");
    let out = spinnet(&["bound", "--net", net.to_str().unwrap(), "--target", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], "spinnet.report/1");
    assert_eq!(r["command"]["name"], "bound");
    assert_eq!(r["network"]["n"], 7);
    assert_eq!(r["network"]["bipartite"], true);
    assert!((f(&r["result"]["fidelity"]) - 0.6).abs() < 1e-9);
    assert_eq!(r["result"]["phase_attainable"], true);
    assert!(r["result"]["classification"].is_object());
}

#[test]
fn amplitude_map_targets_are_normalized() {
    let out = spinnet(&["bound", "--net", "fig2", "--target", r#"{"6": [1, 0], "7": [1, 0]}"#]);
    assert!((f(&report(&out)["result"]["fidelity"]) - 0.8).abs() < 1e-9);
}

#[test]
fn analyze_fork_chain() {
    let r = report(&spinnet(&["analyze", "--net", "fig1"]));
    let res = &r["result"];
    assert_eq!(res["csos"], 1);
    assert_eq!(res["asos_on_accessible"], 1);
    assert_eq!(res["accessible_dim"], 6);
    assert_eq!(res["lie_dim"], 15);
    assert_eq!(res["blocks"].as_array().unwrap().len(), 2);
}

#[test]
fn catalyze_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cat.json");
    let out = spinnet(&["catalyze", "--net", "fig2", "--target", "3", "--quality", "0.02", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read(&out_path);
    assert_eq!(r["result"]["feasible"], true);
    assert!(f(&r["result"]["simulation"]["fidelity"]) >= 0.9);
    let csv = std::fs::read_to_string(dir.path().join("cat.trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("time,1,2,3,4,5,6,7,\"1,2\""));
    assert!(csv.lines().count() > 100);
}

#[test]
fn catalyze_reports_blocker_with_exit_three() {
    let s = 0.5f64.sqrt();
    let target = format!(r#"{{"6": [{s}, 0], "7": [{}, 0]}}"#, -s);
    let out = spinnet(&["catalyze", "--net", "fig2", "--target", &target]);
    assert_eq!(out.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["result"]["feasible"], false);
    assert_eq!(r["result"]["blocker"]["kind"], "Permutation");
    assert_eq!(r["result"]["blocker"]["permutation"], "(6 7)");
}

#[test]
fn simulate_then_replay_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sim.json");
    let out = spinnet(&["simulate", "--net", "fig1", "--target", "5", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = read(&out_path);
    let fid = f(&r["result"]["simulation"]["fidelity"]);
    assert!(fid >= 0.98);
    assert!(dir.path().join("sim.trajectory.csv").exists());

    let sched = dir.path().join("schedule.json");
    std::fs::write(&sched, r["result"]["schedule"].to_string()).unwrap();
    let replay = report(&spinnet(&["simulate", "--net", "fig1", "--target", "5", "--schedule", sched.to_str().unwrap()]));
    // the schedule passed through 12-digit rounding
    assert!((f(&replay["result"]["simulation"]["fidelity"]) - fid).abs() < 1e-6);
    assert!(replay["result"]["synthesis"].is_null());
}

#[test]
fn refinement_needs_a_seed() {
    let out = spinnet(&["simulate", "--net", "fig2", "--target", "3", "--refine", "true"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`seed`"));
    let out = spinnet(&["simulate", "--net", "fig2", "--target", "3", "--quality", "0.05", "--refine", "true", "--seed", "4"]);
    let r = report(&out);
    let refine = &r["result"]["refinement"];
    assert!(f(&refine["fidelity"]) >= f(&refine["initial_fidelity"]));
    assert!(refine["evaluations"].as_u64().unwrap() <= 200);
    assert!(f(&r["result"]["simulation"]["fidelity"]) <= 0.6 + 1e-6);
}

#[test]
fn identify_resolves_triangle_tail_signs() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("id.json");
    let out = spinnet(&["identify", "--net", "triangle_tail", "--epsilon", "0.01", "--T", "5000", "--dt", "0.1", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = read(&out_path);
    let est = r["result"]["estimates"].as_array().unwrap();
    assert_eq!(est.len(), 4);
    assert!(est.iter().all(|e| e["sign_resolved"] == true));
    assert_eq!(r["result"]["symmetric"], false);
    let csv = std::fs::read_to_string(dir.path().join("id.record.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("time,probability"));
}

#[test]
fn shots_need_a_seed() {
    let out = spinnet(&["identify", "--net", "pair", "--shots", "100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let a = spinnet(&["simulate", "--net", "fig2", "--target", "3"]);
    let b = spinnet(&["simulate", "--net", "fig2", "--target", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validation_errors_exit_two() {
    assert_eq!(spinnet(&["bound", "--net", "fig1", "--target", "3", "--bogus"]).status.code(), Some(2));
    assert_eq!(spinnet(&["bound", "--net", "/no/such/file.json", "--target", "3"]).status.code(), Some(2));
    assert_eq!(spinnet(&["bound", "--net", "fig1", "--target", "1,4"]).status.code(), Some(2));
    assert_eq!(spinnet(&["bound", "--net", "fig1"]).status.code(), Some(2));
    assert_eq!(spinnet(&["frobnicate"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n": 3, "drift": [[2, 3, "x"]], "control": [[1, 2, 1.0]]}"#).unwrap();
    let out = spinnet(&["analyze", "--net", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('`'), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fixtures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&spinnet(&["fixtures", "--out", dir.path().to_str().unwrap()]));
    let files = r["result"]["files"].as_array().unwrap();
    assert_eq!(files.len(), spinnet::fixtures::ALL.len());
    for name in ["fig1.json", "fig2.json", "triangle.json", "triangle_tail.json", "pair.json"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        spinnet::parse_network(&text).unwrap();
    }
}

#[test]
fn in_process_entry_point_matches_binary() {
    assert_eq!(spinnet::cli::run(["spinnet", "bound", "--net", "fig1", "--target", "5"]), 0);
    assert_eq!(spinnet::cli::run(["spinnet", "bound", "--net", "fig1", "--target", "0"]), 2);
}
