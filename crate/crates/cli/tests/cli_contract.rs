//! End-to-end contract of the `hyptime` binary: exit codes, bundle
//! determinism, manifest-only runs, and override handling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hyptime() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyptime"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn run(subcommand: &str, config: &Path, out: &Path) -> Output {
    hyptime()
        .arg(subcommand)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const TIMES_CAT2: &str = r#"{
  "system": {"kind": "cat2"},
  "orbit": {"forward": 200},
  "splitting": {"mode": "analytic-torus"},
  "analysis": {"kind": "times", "log_lambda1": 0.9, "log_lambda2": 1.9},
  "seed": 7,
  "expectations": [
    {"metric": "density.lower", "op": "eq", "value": 1.0},
    {"metric": "times.count", "op": "eq", "value": 200.0}
  ]
}"#;

#[test]
fn passing_expectations_exit_zero_and_write_the_full_bundle() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", TIMES_CAT2);
    let out = dir.path().join("out");
    let output = run("analyze-times", &config, &out);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    for name in ["manifest.json", "summary.txt", "times.json", "density.csv"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(
        summary.contains("N = 200"),
        "summary must state the truncation horizon prominently:\n{summary}"
    );
    assert!(summary.contains("result: PASS"));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        &TIMES_CAT2.replace("\"value\": 200.0", "\"value\": 7.0"),
    );
    let out = dir.path().join("out");
    let output = run("analyze-times", &config, &out);
    assert_eq!(exit_code(&output), 1);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("FAIL times.count"));
    assert!(summary.contains("result: FAIL"));
}

#[test]
fn threshold_ordering_violation_exits_two_with_a_pointer() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{
          "system": {"kind": "cat2"},
          "orbit": {"forward": 100},
          "splitting": {"mode": "analytic-torus"},
          "analysis": {"kind": "blocks", "gamma1": -0.9, "gamma2": 0.9, "theta": 0.5},
          "seed": 1
        }"#,
    );
    let out = dir.path().join("out");
    let output = run("blocks", &config, &out);
    assert_eq!(exit_code(&output), 2);
    let err = stderr(&output);
    assert!(
        err.contains("/analysis/gamma1"),
        "stderr must point at the violated constraint: {err}"
    );
    assert!(!out.join("manifest.json").exists(), "no bundle on config error");
}

#[test]
fn subcommand_and_config_analysis_must_agree() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", TIMES_CAT2);
    let out = dir.path().join("out");
    let output = run("grow", &config, &out);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("/analysis/kind"));
}

#[test]
fn missing_config_flag_exits_two() {
    let output = hyptime().arg("blocks").output().unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn unknown_subcommand_exits_two() {
    let output = hyptime().arg("frobnicate").output().unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn runtime_failure_exits_three() {
    // Structurally valid config whose dynamics violate the exponent order
    // the nested grower needs: the axes label the contracting direction as
    // the strongest expander on the forward system.
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{
          "system": {"kind": "diag3"},
          "orbit": {"forward": 48},
          "splitting": {"mode": "axes", "e": [2], "f": [1], "g": [0]},
          "analysis": {
            "kind": "nested",
            "params": {
              "sigma1": 1.5683121854901687, "sigma2": 1.5683121854901687,
              "a": 0.5, "r": 0.05, "h": 0.005,
              "chi": 2.0, "t_cap": 1.5, "n_max": 48, "tol_c1": 1e-9
            }
          },
          "seed": 3
        }"#,
    );
    let out = dir.path().join("out");
    let output = run("nested", &config, &out);
    assert_eq!(exit_code(&output), 3, "stderr: {}", stderr(&output));
    assert!(stderr(&output).contains("exponent ordering"));
}

#[test]
fn config_without_analysis_writes_manifest_only_and_exits_zero() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"system": {"kind": "cat2"}, "seed": 9}"#,
    );
    let out = dir.path().join("out");
    let output = run("synth", &config, &out);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    let entries: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(entries, vec!["manifest.json"]);
    // Any subcommand accepts a manifest-only config.
    let out2 = dir.path().join("out2");
    assert_eq!(exit_code(&run("grow", &config, &out2)), 0);
}

fn bundle_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn identical_config_and_seed_produce_byte_identical_bundles() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{
          "system": {"kind": "skew-nonuniform", "window": 300},
          "orbit": {"forward": 200},
          "splitting": {"mode": "axes", "e": [1], "f": [2], "g": [0]},
          "analysis": {
            "kind": "measure-sweep",
            "block": "lambda",
            "gamma1": 0.8, "gamma2": -0.7,
            "ells": [1, 2, 4],
            "samples": 40
          },
          "seed": 20260822
        }"#,
    );
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(exit_code(&run("measure-sweep", &config, &out_a)), 0);
    assert_eq!(exit_code(&run("measure-sweep", &config, &out_b)), 0);
    let (a, b) = (bundle_bytes(&out_a), bundle_bytes(&out_b));
    assert_eq!(
        a.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        b.iter().map(|(n, _)| n).collect::<Vec<_>>()
    );
    for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(bytes_a, bytes_b, "artifact {name} differs between runs");
    }
}

#[test]
fn seed_override_changes_the_sampled_bundle() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{
          "system": {"kind": "skew-nonuniform", "window": 300},
          "orbit": {"forward": 200},
          "splitting": {"mode": "axes", "e": [1], "f": [2], "g": [0]},
          "analysis": {
            "kind": "measure-sweep",
            "block": "h",
            "gamma2": -0.5,
            "ells": [4],
            "samples": 60
          },
          "seed": 1
        }"#,
    );
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(exit_code(&run("measure-sweep", &config, &out_a)), 0);
    let output = hyptime()
        .args(["measure-sweep", "--seed", "2", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_b)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let manifest_b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_b.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest_b["seed"], 2, "manifest echoes the overridden seed");
    assert_eq!(manifest_b["config"]["seed"], 2);
}

#[test]
fn samples_override_is_rejected_outside_measure_sweeps() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", TIMES_CAT2);
    let out = dir.path().join("out");
    let output = hyptime()
        .args(["analyze-times", "--samples", "10", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("--samples"));
}

#[test]
fn horizon_override_rewrites_the_orbit_window() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", TIMES_CAT2);
    let out = dir.path().join("out");
    let output = hyptime()
        .args(["analyze-times", "--horizon", "150", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    // The horizon-dependent expectation (count == 200) now fails: exit 1,
    // and the manifest echoes the merged config.
    assert_eq!(exit_code(&output), 1);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["orbit"]["forward"], 150);
}

#[test]
fn torus_lambda_block_sweep_is_certain_at_every_block_length() {
    // On the uniformly hyperbolic torus map every orbit passes the
    // two-sided block test at thresholds inside the spectral gap, so the
    // estimated measure is exactly 1 at every block length.
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{
          "system": {"kind": "cat2"},
          "orbit": {"forward": 256},
          "splitting": {"mode": "analytic-torus"},
          "analysis": {
            "kind": "measure-sweep",
            "block": "lambda",
            "gamma1": 0.9, "gamma2": -0.9,
            "ells": [1, 2, 3, 4, 5, 6, 7, 8],
            "samples": 64
          },
          "seed": 5
        }"#,
    );
    let out = dir.path().join("out");
    let output = run("measure-sweep", &config, &out);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("measure.json")).unwrap()).unwrap();
    let estimates = report["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 8);
    for e in estimates {
        assert_eq!(
            e["estimate"].as_f64().unwrap(),
            1.0,
            "ell = {}: every torus orbit is a member",
            e["ell"]
        );
    }
    assert_eq!(report["nondecreasing_within_ci"], true);
}
