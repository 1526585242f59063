//! End-to-end checks of the `ergolab` binary: exit codes, artifact layout,
//! manifest digests, and rerun determinism.

use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

const SCENARIO: &str = r#"
schema_version = 1
scenario = "cli-smoke"
seed = 9

[run]
n = 256

[[chain.t]]
kind = "rotation"
angle = { rational = [1, 3] }
cutoff = 6

[[chain.t]]
kind = "rotation"
angle = { rational = [1, 3] }
cutoff = 6

[[chain.a]]
kind = "identity"
basis = { cutoff = 6 }

[input]
preset = "mode"
mode = 1
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergolab"))
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn hex_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn average_writes_manifest_with_matching_digests() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), SCENARIO);
    let out = dir.path().join("out");
    let status = bin()
        .args(["average", "--config", &config, "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    let names: Vec<&str> = files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"series_detail.csv"));
    assert!(names.contains(&"series_summary.csv"));
    for f in files {
        let body = std::fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex_sha256(&body));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, body.len());
    }
    assert_eq!(
        manifest["config_sha256"].as_str().unwrap(),
        hex_sha256(SCENARIO.as_bytes())
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), SCENARIO);
    let mut bodies = Vec::new();
    for (out, threads) in [("a", "2"), ("b", "2"), ("c", "1")] {
        let out = dir.path().join(out);
        let status = bin()
            .args([
                "predict",
                "--config",
                &config,
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .status()
            .unwrap();
        assert!(status.success());
        let mut joined = String::new();
        for name in ["limit.csv", "resonance.csv", "series_detail.csv", "compare.csv"] {
            joined.push_str(&std::fs::read_to_string(out.join(name)).unwrap());
        }
        bodies.push(joined);
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
}

#[test]
fn schema_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), &SCENARIO.replace("n = 256", "n = 256\nbogus = 1"));
    let out = dir.path().join("out");
    let status = bin()
        .args(["average", "--config", &config, "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn missing_seed_with_randomness_exits_1() {
    let text = SCENARIO
        .replace("seed = 9\n", "")
        .replace("preset = \"mode\"\nmode = 1", "preset = \"random\"");
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), &text);
    let out = dir.path().join("out");
    let status = bin()
        .args(["average", "--config", &config, "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn validation_failure_exits_2() {
    // an expanding diagonal is not a Dunford-Schwartz contraction
    let text = r#"
schema_version = 1
scenario = "bad-contraction"
seed = 9

[run]
validate_chain = true

[[chain.t]]
kind = "dense-spatial"
rows = [[[1.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.5, 0.0]]]
"#;
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), text);
    let out = dir.path().join("out");
    let status = bin()
        .args(["validate", "--config", &config, "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn numerical_guard_exits_3() {
    // epsilon so small that the certificate cutoff cap is exceeded
    let text = r#"
schema_version = 1
scenario = "cap"

[volterra]
epsilon = 1e-9
m_cap = 1000
trials = 0
"#;
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), text);
    let out = dir.path().join("out");
    let status = bin()
        .args(["volterra-cert", "--config", &config, "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn validate_reports_permutation_ratios_of_one() {
    let text = r#"
schema_version = 1
scenario = "perm-validate"

[[chain.t]]
kind = "multiplier-permutation"
size = 11
multiplier = 2
"#;
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), text);
    let out = dir.path().join("out");
    let status = bin()
        .args(["validate", "--config", &config, "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = std::fs::read_to_string(out.join("ds_t0.csv")).unwrap();
    let line = report.lines().nth(1).unwrap();
    let fields: Vec<&str> = line.split(',').collect();
    let l1: f64 = fields[1].parse().unwrap();
    let linf: f64 = fields[2].parse().unwrap();
    assert!((l1 - 1.0).abs() < 1e-12 && (linf - 1.0).abs() < 1e-12, "{line}");
}

#[test]
fn env_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), SCENARIO);
    let out = dir.path().join("env-out");
    let status = bin()
        .env("ERGOLAB_OUT", out.to_str().unwrap())
        .args(["decompose", "--config", &config])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("decomposition.csv").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn bare_certificate_run_reports_m_min_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["volterra-cert", "--epsilon", "10", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let cert = std::fs::read_to_string(out.join("certificate.csv")).unwrap();
    let line = cert.lines().nth(1).unwrap();
    assert_eq!(line.split(',').nth(1).unwrap(), "1");
}
