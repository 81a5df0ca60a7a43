use std::fs;
use std::path::Path;
use std::process::Command;

use wquant::tail::TruncationReport;
use wquant::Approximant;

fn wquant(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wquant")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn sweep_csv_is_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"measure": {"type": "uniform_cube", "dim": 2}, "n_values": [4, 16, 64, 256], "p": 2}"#,
    );
    let mut csv = Vec::new();
    for jobs in ["1", "8"] {
        let out = tmp.path().join(format!("out{jobs}"));
        let (code, _) = wquant(&["sweep-n", "--config", &cfg, "--jobs", jobs, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        for f in ["report.csv", "report.json", "plot.svg"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        csv.push(fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
    let text = String::from_utf8(csv[0].clone()).unwrap();
    assert!(text.starts_with("parameter,measured_wp,coupling_bound,theoretical_bound,terms,seed\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn failed_assertion_sets_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"measure": {"type": "uniform_cube", "dim": 1}, "n_values": [4, 16, 64], "slope_window": [1.0, 2.0]}"#,
    );
    let (code, _) = wquant(&["sweep-n", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(tmp.path().join("report.csv").exists());
}

#[test]
fn bad_config_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"measure": {"type": "uniform_cube", "dim": 1}, "h_values": [0.1, 0.5]}"#);
    assert_eq!(wquant(&["sweep-h", "--config", &cfg]).0, 2);
    assert_eq!(wquant(&["sweep-h"]).0, 2);
}

#[test]
fn quantize_writes_a_loadable_approximant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"measure": {"type": "gaussian", "dim": 2, "sigma": 0.3, "truncation": 4}, "lattice": {"kind": "A2", "dim": 2},
            "h_values": [0.25], "mode": "indicator"}"#,
    );
    let (code, _) = wquant(&["quantize", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let a = Approximant::from_json(&fs::read_to_string(tmp.path().join("approximant.json")).unwrap()).unwrap();
    assert!((a.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn tail_check_from_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write(
        tmp.path(),
        "m.json",
        r#"{"type": "atoms", "dim": 2, "atoms": [{"location": [0, 0], "weight": 0.999}, {"location": [3.5, 0], "weight": 0.001}]}"#,
    );
    let (code, out) = wquant(&["tail", "--measure", &m, "--R", "2.5", "--p", "2", "--epsilon", "0.1"]);
    let r: TruncationReport = serde_json::from_str(&out).unwrap();
    assert!((r.bound_atomic - 0.001).abs() < 1e-15);
    // the exterior atom sits at index 2, where the allowed weight is
    // 0.1^2 / 3 / (pi^2 / 6) / 2^2 ~ 5.07e-4 < 1e-3
    assert_eq!(r.offending_atoms, vec![2]);
    assert_eq!(r.conditions_pass, [true, true, false]);
    assert_eq!(code, 1);
}
