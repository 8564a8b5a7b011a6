use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quitting")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn classify_team_game() {
    let out = run(&["classify", &fixture("team_game.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["normal_set"], serde_json::json!([1, 2, 3, 4]));
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert!(r["tolerances"]["classification"].is_number());
    assert!(!r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn recurrent_target_passes() {
    let out = run(&["sunspot", &fixture("team_game.json"), "--eps", "0.05", "--target", "0.25,0.25,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["profile"]["initial"], serde_json::json!([0.5, 0.5, 0.0, 0.0]));
}

#[test]
fn target_outside_feasible_set_is_an_input_error() {
    let out = run(&["sunspot", &fixture("team_game.json"), "--target", "0.5,0.5,0,0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn lcp_example_has_a_solution() {
    let out = run(&["lcp", "--matrix", &fixture("cyclic_q.json"), "--q", "0,0,-1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["found"], true);
    let z: Vec<f64> = serde_json::from_value(r["solution"]["standard_z"].clone()).unwrap();
    // w = q + R z must vanish on the support and be nonnegative elsewhere
    let m = [[0.0, 2.0, -1.0], [-1.0, 0.0, 2.0], [2.0, -1.0, 0.0]];
    let q = [0.0, 0.0, -1.0];
    for i in 0..3 {
        let w = q[i] + (0..3).map(|j| m[i][j] * z[j]).sum::<f64>();
        assert!(w >= -1e-9 && (z[i] * w).abs() < 1e-9);
    }
}

#[test]
fn exact_lcp_agrees_with_float() {
    let float = report(&run(&["lcp", "--matrix", &fixture("cyclic_q.json"), "--q", "0,0,-1"]));
    let exact = report(&run(&["lcp", "--matrix", &fixture("cyclic_q.json"), "--q", "0,0,-1", "--exact"]));
    assert_eq!(float["solution"], exact["solution"]);
}

#[test]
fn stationary_exit_codes() {
    assert_eq!(run(&["stationary", &fixture("zero_lcp_solution.json"), "--eps", "0.05"]).status.code(), Some(0));
    assert_eq!(run(&["stationary", &fixture("team_game.json")]).status.code(), Some(2));
}

#[test]
fn sunspot_profile_round_trips_through_verify_and_simulate() {
    let dir = std::env::temp_dir().join(format!("quitting-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("profile.json").display().to_string();
    let out = run(&["sunspot", &fixture("team_game.json"), "--eps", "0.1", "--profile", &path]);
    assert_eq!(out.status.code(), Some(0));
    let built = report(&out);

    let out = run(&["verify", &fixture("team_game.json"), "--profile", &path, "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let verified = report(&out);
    assert_eq!(verified["report"]["value"], built["report"]["value"]);

    let out = run(&["simulate", &fixture("team_game.json"), "--profile", &path, "--runs", "5000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["within_3_standard_errors"], true);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn broken_profile_fails_verification() {
    let dir = std::env::temp_dir().join(format!("quitting-cli-broken-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let text = std::fs::read_to_string(fixture("team_alternating_profile.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    // all mass on the do-nothing type: nobody ever quits
    for kb in v["kiloblocks"].as_array_mut().unwrap() {
        kb["z"] = serde_json::json!([1.0, 0.0, 0.0, 0.0, 0.0]);
    }
    let path = dir.join("broken.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = run(&["verify", &fixture("team_game.json"), "--profile", &path.display().to_string(), "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["pass"], false);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["sunspot", &fixture("team_game.json"), "--eps", "0.1"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let sim = ["simulate", &fixture("team_game.json"), "--profile", &fixture("team_alternating_profile.json"), "--runs", "2000", "--seed", "11"];
    assert_eq!(run(&sim).stdout, run(&sim).stdout);
}

#[test]
fn floats_are_rounded_to_twelve_digits() {
    let r = report(&run(&["lcp", "--matrix", &fixture("cyclic_q.json"), "--q", "0,0,-1"]));
    let z = r["solution"]["z"][1].as_f64().unwrap();
    assert_eq!(z, 0.285714285714);
}

#[test]
fn malformed_inputs_exit_one() {
    assert_eq!(run(&["classify", "/nonexistent/game.json"]).status.code(), Some(1));
    assert_eq!(run(&["lcp", "--matrix", &fixture("cyclic_q.json"), "--q", "0,x,1"]).status.code(), Some(1));
    assert_eq!(run(&["lcp", "--matrix", &fixture("cyclic_q.json"), "--q", "0,0,-1", "--kind", "bogus"]).status.code(), Some(1));
    assert_eq!(run(&["block", &fixture("team_game.json"), "--y", "0.1,0.1,0.1,0.1"]).status.code(), Some(1));
}

#[test]
fn mmatrix_exact_reports_rationals() {
    let out = run(&["mmatrix", &fixture("team_game.json"), "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let nodes = r["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 4);
    assert_eq!(nodes[0]["quitter"], 2);
    assert!(nodes[0]["w"][0].is_string());
}
