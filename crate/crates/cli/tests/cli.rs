mod common;

use common::{q, run, write_canonical, Oracle};
use serde_json::Value;

fn json(out: &std::process::Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_e1_json() {
    let dir = tempfile::tempdir().unwrap();
    let e1 = write_canonical(dir.path(), "E1");
    let v = json(&run(&["solve", e1.to_str().unwrap(), "--format", "json"]));
    assert_eq!(v["v"][0]["w"], "3");
    assert_eq!(v["optimal_value"], "3");
    assert_eq!(v["tau_hat"]["w"], 1);
}

#[test]
fn solve_at_a_time_map() {
    let dir = tempfile::tempdir().unwrap();
    let e3 = write_canonical(dir.path(), "E3");
    let at = dir.path().join("s.json");
    std::fs::write(&at, r#"{"u": 2, "d": 2}"#).unwrap();
    let v = json(&run(&["solve", e3.to_str().unwrap(), "--at-map", at.to_str().unwrap(), "--format", "json"]));
    assert_eq!(v["value_at_s"]["u"], "3");
    assert_eq!(v["value_at_s"]["d"], "0");
    assert_eq!(v["optimal_value"], "3/2");

    // not predictable: u and d are not separated before t = 2
    std::fs::write(&at, r#"{"u": 1, "d": 2}"#).unwrap();
    let out = run(&["solve", e3.to_str().unwrap(), "--at-map", at.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not predictable"));
}

#[test]
fn verify_e3_passes() {
    let dir = tempfile::tempdir().unwrap();
    let e3 = write_canonical(dir.path(), "E3");
    let out = run(&["verify", e3.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["summary"]["fail"], 0);
    assert_eq!(v["summary"]["not_modeled"], 5);
}

#[test]
fn verify_selected_and_unknown_props() {
    let dir = tempfile::tempdir().unwrap();
    let e2 = write_canonical(dir.path(), "E2");
    let v = json(&run(&["verify", e2.to_str().unwrap(), "--props", "aggregation,reward_or_strict"]));
    assert_eq!(v["properties"].as_array().unwrap().len(), 2);
    let out = run(&["verify", e2.to_str().unwrap(), "--props", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let e3 = write_canonical(dir.path(), "E3");
    let out = std::process::Command::new(common::bin())
        .args(["verify", e3.to_str().unwrap(), "--strict-budget"])
        .env("PREDSTOP_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["budget"], 1);
    assert!(v["summary"]["skipped_budget"].as_u64().unwrap() > 0);
    assert_eq!(v["summary"]["fail"], 0);
}

#[test]
fn enumerate_e3_from_zero() {
    let dir = tempfile::tempdir().unwrap();
    let e3 = write_canonical(dir.path(), "E3");
    let v = json(&run(&["enumerate", e3.to_str().unwrap(), "--from", "0"]));
    let got: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["expected_reward"].as_str().unwrap()).collect();
    assert_eq!(got, ["0", "1", "3/2"]);
    let strict = json(&run(&["enumerate", e3.to_str().unwrap(), "--from", "0", "--strict"]));
    assert_eq!(strict.as_array().unwrap().len(), 2);
}

#[test]
fn enumerate_matches_the_oracle_on_generated_instances() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10u64 {
        let path = dir.path().join(format!("{seed}.json"));
        let out = run(&["generate", "--seed", &seed.to_string(), "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
        let inst = predstop::load(&path).unwrap();
        let o = Oracle::new(&inst);
        let v = json(&run(&["enumerate", path.to_str().unwrap()]));
        let listed: Vec<(Vec<usize>, String)> = v
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (o.time_of(&e["tau"]), e["expected_reward"].as_str().unwrap().to_string()))
            .collect();
        let expected: Vec<(Vec<usize>, String)> =
            o.all.iter().map(|t| (t.clone(), o.expect(&o.reward(t)).to_string())).collect();
        assert_eq!(listed, expected, "seed {seed}");
    }
}

#[test]
fn decompose_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let e1 = write_canonical(dir.path(), "E1");
    let out = run(&["decompose", e1.to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# m"));
    assert_eq!(lines.next(), Some("time,outcome,value"));
    // M_0 = V(0) = 3; ΔC_1 = V(1) - V⁺(1) = 1
    assert!(text.contains("# m\ntime,outcome,value\n0,w,3\n"));
    assert!(text.contains("# delta_c\ntime,outcome,value\n0,w,0\n1,w,1\n2,w,0\n"), "{text}");
}

#[test]
fn generate_is_deterministic_and_validates_params() {
    let a = run(&["generate", "--seed", "4", "--qlc-prob", "1/3"]);
    let b = run(&["generate", "--seed", "4", "--qlc-prob", "1/3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(run(&["generate", "--seed", "4", "--qlc-prob", "3/2"]).status.code(), Some(2));
    assert_eq!(run(&["generate", "--seed", "4", "--qlc-prob", "0.5"]).status.code(), Some(2));
    let out = run(&["generate", "--canonical", "E4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fuzz_reports_clean_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fuzz", "--seeds", "5", "--max-outcomes", "4", "--horizon", "2", "--qlc-prob", "1/2", "--out", dir.path().to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(v["seeds"], 5);
    assert!(v["failing"].as_array().unwrap().is_empty());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn e2_value_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let e2 = write_canonical(dir.path(), "E2");
    let v = json(&run(&["solve", e2.to_str().unwrap(), "--format", "json"]));
    assert_eq!(v["optimal_value"], "1");
    assert_eq!(v["tau_hat"], serde_json::json!({"u": 0, "d": 0}));
    assert_eq!(q(v["v_plus"][0]["u"].as_str().unwrap()), q("1"));
}
