//! End-to-end runs of the `longmem` binary.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn longmem(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_longmem"));
    cmd.args(args).env_remove("LONGMEM_THREADS");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn white_noise_interval_covers_zero() {
    let path = fixture("white_noise.csv");
    let out = run_ok(&mut longmem(&[
        "estimate",
        "--input",
        path.to_str().unwrap(),
        "--level",
        "0.99",
    ]));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ci = v["ci"].as_array().unwrap();
    let (low, high) = (ci[0].as_f64().unwrap(), ci[1].as_f64().unwrap());
    let d_hat = v["d_hat"].as_f64().unwrap();
    assert!(low < d_hat && d_hat < high);
    assert!(low <= 0.0 && 0.0 <= high, "[{low}, {high}]");
    assert_eq!(v["n"], 8192);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn simulate_is_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        run_ok(&mut longmem(&[
            "simulate",
            "--d0",
            "0",
            "--n",
            "4",
            "--seed",
            "1",
            "--output",
            path.to_str().unwrap(),
        ]));
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 4);
}

#[test]
fn simulated_series_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    run_ok(&mut longmem(&[
        "simulate",
        "--d0",
        "0.8",
        "--n",
        "4096",
        "--seed",
        "3",
        "--output",
        path.to_str().unwrap(),
    ]));
    let out = run_ok(&mut longmem(&[
        "estimate",
        "--input",
        path.to_str().unwrap(),
        "--no-ci",
    ]));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["d_hat"].as_f64().unwrap() - 0.8).abs() < 0.15, "{v}");
}

#[test]
fn vartable_null_row_matches_closed_form() {
    let out = run_ok(&mut longmem(&[
        "vartable",
        "--wavelet",
        "db2",
        "--d-min",
        "-0.5",
        "--d-max",
        "1.5",
        "--d-step",
        "0.25",
        "--ell",
        "8",
    ]));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "family,d,ell,variance,shannon");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    let null = rows
        .iter()
        .find(|r| r[1].parse::<f64>().unwrap() == 0.0)
        .unwrap();
    let v: f64 = null[3].parse().unwrap();
    let target = common::null_variance(8);
    assert!((v - target).abs() < 1e-6, "{v} vs {target}");
}

#[test]
fn malformed_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "value\n0.1\n0.2\nfoo\n").unwrap();
    let out = longmem(&["estimate", "--input", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

fn mc_json(threads: Option<&str>) -> Output {
    let mut cmd = longmem(&[
        "mc", "--d0", "0.3", "--n", "1024", "--reps", "40", "--seed", "9",
    ]);
    if let Some(t) = threads {
        cmd.env("LONGMEM_THREADS", t);
    }
    cmd.output().unwrap()
}

#[test]
fn monte_carlo_does_not_depend_on_thread_count() {
    let strip = |out: Output| {
        assert!(out.status.success());
        let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v.as_object_mut().unwrap().remove("runtime_s");
        v
    };
    let one = strip(mc_json(Some("1")));
    assert_eq!(one, strip(mc_json(Some("3"))));
    assert_eq!(one, strip(mc_json(None)));

    let bad = mc_json(Some("zero"));
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("LONGMEM_THREADS"));
}
