use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cascade_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade-lab"))
        .args(args)
        .env_remove("CASCADE_LAB_SEED")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dims_reports_the_uniform_constants() {
    let out = cascade_lab(&["dims", "--law", "uniform"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let r = &v["result"];
    assert!((r["D_F"].as_f64().unwrap() - 0.584963).abs() < 1e-6);
    assert!((r["gamma_plus"]["value"].as_f64().unwrap() - 0.33465).abs() < 1e-5);
    assert!((r["gamma_minus"]["value"].as_f64().unwrap() - 3.8641).abs() < 1e-4);
    assert_eq!(v["config"]["law"], "uniform");
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn boundary_exponents_are_spelled_out() {
    let out = cascade_lab(&["dims", "--law", "twopoint:0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["result"]["gamma_plus"]["argmin_p"], "inf");
    assert_eq!(v["result"]["gamma_plus"]["attained"], false);
    assert!((v["result"]["gamma_minus"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn invalid_laws_exit_with_an_error_document() {
    for law in ["twopoint:0.7", "twopoint:0.5", "beta:-1", "gauss", "discrete:@/no/such/file.csv"] {
        let out = cascade_lab(&["dims", "--law", law]);
        assert_eq!(out.status.code(), Some(2), "{law}");
        let v = json_of(&out);
        assert!(v["error"]["message"].as_str().unwrap().len() > 5, "{law}");
    }
    let v = json_of(&cascade_lab(&["dims", "--law", "twopoint:0.5"]));
    assert_eq!(v["error"]["kind"], "degenerate_law");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cascade_lab(&["frob"]).status.code(), Some(2));
    assert_eq!(cascade_lab(&["moments", "-n", "abc"]).status.code(), Some(2));
    assert_eq!(cascade_lab(&["selftest", "slow"]).status.code(), Some(2));
    let out = cascade_lab(&["moments", "-n", "30", "-R", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_of(&out)["error"]["kind"], "depth_exceeded");
    assert_eq!(cascade_lab(&["--help"]).status.code(), Some(0));
}

#[test]
fn clt_writes_summary_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("clt.csv");
    let out = cascade_lab(&["clt", "--law", "uniform", "-n", "3", "-k", "6", "-R", "500", "--seed", "42", "--csv", path_str(&csv)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["config"]["k"], 6);
    assert_eq!(v["config"]["replicas"], 500);
    assert!(v["result"]["var_re"]["z_score"].is_number());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("replica,re,im,m2\n"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = cascade_lab(&["moments", "-n", "8", "-s", "3", "-R", "300", "--seed", "9", "--out", path_str(&first)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();

    let mut config = v["config"].clone();
    let second = dir.path().join("second.json");
    config["out"] = Value::String(path_str(&second).into());
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, config.to_string()).unwrap();
    assert_eq!(cascade_lab(&["moments", "--config", path_str(&cfg)]).status.code(), Some(0));
    let w: Value = serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    let estimate = |d: &Value| d["result"]["result"]["summary"]["estimate"].as_f64().unwrap().to_bits();
    assert_eq!(estimate(&v), estimate(&w));
}

#[test]
fn flags_override_config_and_unknown_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"law": "beta:2", "n": 6, "replicas": 200}"#).unwrap();
    let v = json_of(&cascade_lab(&["varpi", "--config", path_str(&cfg), "-n", "4"]));
    assert_eq!(v["config"]["law"], "beta:2");
    assert_eq!(v["config"]["n"], 4);

    std::fs::write(&cfg, r#"{"law": "uniform", "replica_count": 5}"#).unwrap();
    let out = cascade_lab(&["dims", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(json_of(&out)["error"]["message"].as_str().unwrap().contains("replica_count"));
}

#[test]
fn seed_defaults_to_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_cascade-lab"))
        .args(["m2", "-n", "6", "-R", "50"])
        .env("CASCADE_LAB_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(json_of(&out)["config"]["seed"], 1234);
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        let v = json_of(&cascade_lab(&["clt", "-n", "3", "-k", "5", "-R", "600", "--seed", "5", "--threads", threads]));
        v["result"]["var_re"]["summary"]["estimate"].as_f64().unwrap().to_bits()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn z_threshold_turns_mismatches_into_exit_3() {
    let args = ["moments", "-n", "8", "-R", "200", "--seed", "3"];
    assert_eq!(cascade_lab(&args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.extend(["--z-threshold", "0"]);
    let out = cascade_lab(&strict);
    assert_eq!(out.status.code(), Some(3));
    assert!(json_of(&out)["result"]["result"]["z_score"].is_number());
}

#[test]
fn remaining_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let c = path_str(&csv);
    let cases: Vec<Vec<&str>> = vec![
        vec!["spectrum", "-n", "8", "--s-max", "16"],
        vec!["spectrum", "-n", "8", "--s-max", "256", "--csv", c],
        vec!["m2", "-n", "8", "-R", "100", "--csv", c],
        vec!["frostman", "--depths", "6,8,10", "-R", "4", "--csv", c],
        vec!["fdim", "-k", "6", "--levels", "1,2,3", "-R", "200", "--csv", c],
        vec!["entropy", "--law", "beta:2"],
        vec!["entropy", "--mode", "battery", "--count", "20"],
        vec!["entropy", "--mode", "search", "--dim", "3", "--budget", "300"],
        vec!["homeo", "-n", "12", "--t", "0.1,0.9", "--y", "0.3", "--csv", c],
    ];
    for args in cases {
        let out = cascade_lab(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        json_of(&out);
    }
    let v = json_of(&cascade_lab(&["homeo", "-n", "12", "--y", "0.3,0.7"]));
    for inv in v["result"]["inverses"].as_array().unwrap() {
        assert!(inv["residual"].as_f64().unwrap().abs() <= 1e-9);
    }
    assert_eq!(cascade_lab(&["entropy", "--mode", "guess"]).status.code(), Some(2));
    assert_eq!(cascade_lab(&["homeo", "--t", "1.5"]).status.code(), Some(2));
}

#[test]
fn quick_selftest_passes_and_is_reproducible() {
    let out = cascade_lab(&["selftest", "quick", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["result"]["passed"], true);
    assert_eq!(v["result"]["criteria"].as_array().unwrap().len(), 14);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("[PASS]")).count(), 14);

    // Reports agree apart from timings.
    let details = |v: &Value| -> Vec<Value> {
        v["result"]["criteria"].as_array().unwrap().iter().map(|c| c["detail"].clone()).collect()
    };
    let again = json_of(&cascade_lab(&["selftest", "quick", "--seed", "7"]));
    assert_eq!(details(&v), details(&again));
}
