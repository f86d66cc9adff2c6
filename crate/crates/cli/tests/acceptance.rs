//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;

use xpikesim_cli::selftest::{self, Check};

const SEED: u64 = 2;

/// `run` output and trace bytes for a given thread count.
fn run_bytes(threads: &str) -> (Vec<u8>, Vec<u8>) {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let (out, trace) = (dir.path().join("r.json"), dir.path().join("t.jsonl"));
    let status = Command::new(env!("CARGO_BIN_EXE_xpikesim"))
        .env("XPIKESIM_THREADS", threads)
        .args(["run", "--model"])
        .arg(root.join("models/toy"))
        .arg("--input")
        .arg(root.join("models/toy/input.json"))
        .args(["--seed", "11", "--t-now", "86400", "--calibrate", "--oracle", "--timesteps", "512", "--out"])
        .arg(&out)
        .arg("--trace")
        .arg(&trace)
        .status()
        .unwrap();
    assert!(status.success());
    (std::fs::read(out).unwrap(), std::fs::read(trace).unwrap())
}

fn determinism() -> Check {
    let start = std::time::Instant::now();
    let runs = [run_bytes("1"), run_bytes("1"), run_bytes("4"), run_bytes("4")];
    let same = runs.iter().all(|r| *r == runs[0]);
    Check {
        name: "determinism",
        passed: same,
        detail: format!("4 runs over 1 and 4 threads, {} result bytes, identical: {same}", runs[0].0.len()),
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[test]
fn acceptance() {
    let checks = vec![
        selftest::stochastic_multiply(100_000, SEED),
        selftest::ssa_expectation(20, SEED),
        selftest::streaming_equivalence(100, SEED),
        selftest::partition_invariance(50, SEED),
        selftest::crossbar_oracle(1000, SEED),
        selftest::drift_gdc(100, SEED),
        selftest::cost_breakdown(),
        selftest::baseline_ratios(),
        selftest::decoder_causality(50, SEED),
        determinism(),
    ];
    for c in &checks {
        println!("{}", c.line());
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
