//! End-to-end checks of the `sparc` binary: exit codes, record shape, and
//! byte-level determinism.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparc"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sparc-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &std::path::Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn asymptotic_record_fields() {
    let dir = scratch("asym");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{"schema_version":1,"channel":{"kind":"bec","param":0.1,"pi_map":"sign"}}"#,
    );
    let out = dir.join("out.json");
    let status = bin()
        .args(["asymptotic", "--config"])
        .arg(&cfg)
        .args(["--seed", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let record: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(record["kind"], "asymptotic");
    assert_eq!(record["seed"], 5);
    assert!((record["results"]["capacity"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert!(
        (record["results"]["r_un_inf"].as_f64().unwrap() - 0.9 / (std::f64::consts::PI * 2f64.ln()))
            .abs()
            < 1e-12
    );
    assert!(record["config_hash"].as_str().unwrap().len() == 16);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn thresholds_asymptotic_flag_matches_subcommand() {
    let dir = scratch("flag");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{"schema_version":1,"channel":{"kind":"z","param":0.2,"pi_map":"sign"}}"#,
    );
    let out_a = dir.join("a.json");
    let out_b = dir.join("b.json");
    assert!(bin()
        .args(["asymptotic", "--config"])
        .arg(&cfg)
        .args(["--seed", "1", "--out"])
        .arg(&out_a)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["thresholds", "--asymptotic", "--config"])
        .arg(&cfg)
        .args(["--seed", "1", "--out"])
        .arg(&out_b)
        .status()
        .unwrap()
        .success());
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_a).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_b).unwrap()).unwrap();
    assert_eq!(a["results"], b["results"]);
    assert!(b["results"]["p1_star"].as_f64().is_some());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_is_byte_deterministic_and_records_trials() {
    let dir = scratch("sim");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
          "schema_version": 1,
          "channel": {"kind": "bec", "param": 0.1, "pi_map": "sign"},
          "code": {"l": 64, "b": 2, "rate": 0.25},
          "trials": 4
        }"#,
    );
    let out1 = dir.join("r1.json");
    let out2 = dir.join("r2.json");
    for out in [&out1, &out2] {
        assert!(bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--seed", "33", "--out"])
            .arg(out)
            .status()
            .unwrap()
            .success());
    }
    let b1 = std::fs::read(&out1).unwrap();
    let b2 = std::fs::read(&out2).unwrap();
    assert_eq!(b1, b2, "identical (config, seed) must give identical bytes");
    let record: serde_json::Value = serde_json::from_slice(&b1).unwrap();
    let rate = &record["results"]["per_rate"][0];
    assert_eq!(rate["trials_ok"], 4);
    assert_eq!(rate["trials"].as_array().unwrap().len(), 4);
    // a different seed changes the payload
    let out3 = dir.join("r3.json");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--seed", "34", "--out"])
        .arg(&out3)
        .status()
        .unwrap()
        .success());
    assert_ne!(b1, std::fs::read(&out3).unwrap());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_zero_trials_yields_valid_record() {
    let dir = scratch("zero");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
          "schema_version": 1,
          "channel": {"kind": "bsc", "param": 0.05, "pi_map": "sign"},
          "code": {"l": 16, "b": 2, "rate": 0.3},
          "trials": 0
        }"#,
    );
    let out = dir.join("out.json");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--seed", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let record: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(record["results"]["per_rate"][0]["trials_ok"], 0);
    assert!(record["config_hash"].as_str().is_some());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn se_track_emits_aligned_csv() {
    let dir = scratch("track");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
          "schema_version": 1,
          "channel": {"kind": "bec", "param": 0.1, "pi_map": "sign"},
          "code": {"l": 128, "b": 2, "rate": 0.2},
          "trials": 1,
          "se": {"mc_samples": 20000}
        }"#,
    );
    let out = dir.join("track.json");
    assert!(bin()
        .args(["se-track", "--config"])
        .arg(&cfg)
        .args(["--seed", "11", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let csv = std::fs::read_to_string(dir.join("track.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "rate,seed,t,gamp_mse,se_mse");
    // both trajectories start from unit error at t=0
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[2], "0");
    assert_eq!(first[3], "1");
    assert_eq!(first[4], "1");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_inputs_produce_error_json_and_nonzero_exit() {
    let dir = scratch("err");
    // missing config file
    let out = dir.join("x.json");
    let res = bin()
        .args(["simulate", "--config"])
        .arg(dir.join("nope.json"))
        .args(["--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!res.status.success());
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    // invalid channel pairing rejected at parse time
    let bad = write_config(
        &dir,
        "bad.json",
        r#"{"schema_version":1,"channel":{"kind":"awgn","param":1.0,"pi_map":"sign"}}"#,
    );
    let res = bin()
        .args(["asymptotic", "--config"])
        .arg(&bad)
        .args(["--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!res.status.success());
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config-parse");

    // missing seed
    let ok_cfg = write_config(
        &dir,
        "ok.json",
        r#"{"schema_version":1,"channel":{"kind":"bec","param":0.1,"pi_map":"sign"}}"#,
    );
    let res = bin()
        .args(["asymptotic", "--config"])
        .arg(&ok_cfg)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!res.status.success());
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "precondition");

    // wrong schema version
    let wrong = write_config(
        &dir,
        "v2.json",
        r#"{"schema_version":2,"channel":{"kind":"bec","param":0.1,"pi_map":"sign"}}"#,
    );
    let res = bin()
        .args(["asymptotic", "--config"])
        .arg(&wrong)
        .args(["--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!res.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn potential_curve_writes_decomposition() {
    let dir = scratch("pot");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
          "schema_version": 1,
          "channel": {"kind": "bec", "param": 0.1, "pi_map": "sign"},
          "code": {"l": 8, "b": 2, "rate": 0.3},
          "grid_points": 21,
          "se": {"mc_samples": 10000}
        }"#,
    );
    let out = dir.join("curve.json");
    assert!(bin()
        .args(["potential-curve", "--config"])
        .arg(&cfg)
        .args(["--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let csv = std::fs::read_to_string(dir.join("curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22); // header + 21 grid rows
    assert!(csv.lines().next().unwrap() == "rate,e,u,s,f");
    let record: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(record["results"]["per_rate"][0]["gap"], "infinite");
    std::fs::remove_dir_all(&dir).ok();
}
