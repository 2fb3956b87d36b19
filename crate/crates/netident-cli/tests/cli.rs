//! Drives the installed binary the way a user would: real files, real
//! process exits. The exit-code contract (0 confident/success, 2 ambiguous,
//! 3 decode failure, 1 config error) is what scripts build on, so every
//! path through it gets pinned here.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_netident")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_in(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(bin())
        .current_dir(dir)
        .env_remove("NETIDENT_OUTDIR")
        .env_remove("NETIDENT_JOBS")
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Fresh scratch directory per test; tests run concurrently.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("netident-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, content: &str) {
    std::fs::write(dir.join(name), content).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

const LTI3: &str = "model=lti\nn=3\na=1 1 1\nb=1 1/2 3\n";
const NEURAL3: &str = "model=neural\nn=3\ntau=0.6 0.85 0.7\nb=0.1\n";
const PATH3: &str = "n=3\n1 2\n2 3\n";
const TRIANGLE3: &str = "n=3\n1 2\n1 3\n2 3\n";

#[test]
fn gen_w_radix_reports_documented_bounds() {
    // The smallest worked example: two agents with unit gains. The family
    // {empty, edge} has steady-state entries with numerators up to 2 over
    // a common denominator 3, so the smallest valid base is (2·2+1)·3+1.
    let dir = scratch("genw-bounds");
    write(&dir, "m.model", "model=lti\nn=2\na=1 1\nb=1\n");
    let r = run_in(&dir, &["gen-w", "--mode", "radix", "--model", "m.model", "--family", "all:2", "--out", "w.txt"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("base M = 16"), "stdout: {}", r.stdout);
    assert!(r.stdout.contains("N = 2, common denominator D = 3"), "stdout: {}", r.stdout);
    let w = read(&dir, "w.txt");
    let numbers: Vec<&str> =
        w.lines().filter(|l| !l.starts_with('#') && !l.contains('=')).collect();
    assert_eq!(numbers, ["1", "16"]);
}

#[test]
fn gen_w_reruns_are_byte_identical() {
    let dir = scratch("genw-rerun");
    let args = ["gen-w", "--mode", "gaussian", "--n", "4", "--seed", "11", "--out"];
    let r1 = run_in(&dir, &[&args[..], &["a.txt"]].concat());
    let r2 = run_in(&dir, &[&args[..], &["b.txt"]].concat());
    assert_eq!(r1.code, 0);
    assert_eq!(r2.code, 0);
    assert_eq!(read(&dir, "a.txt"), read(&dir, "b.txt"));
}

#[test]
fn radix_roundtrip_through_files() {
    let dir = scratch("radix-files");
    write(&dir, "m.model", LTI3);
    write(&dir, "hidden.graph", PATH3);
    let r = run_in(&dir, &["gen-w", "--mode", "radix", "--model", "m.model", "--family", "all:3", "--out", "w.txt"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let r = run_in(&dir, &["solve-ss", "--model", "m.model", "--graph", "hidden.graph", "--w", "w.txt", "--out", "y.txt"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("exact-lti"));
    let r = run_in(&dir, &["reconstruct-lti", "--model", "m.model", "--w", "w.txt", "--y", "y.txt", "--json", "rec.json"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let rec = json(&dir, "rec.json");
    assert_eq!(rec["graph_key"], "101");
    // b on pairs (1,2), (1,3), (2,3) is (1, 1/2, 3); the path keeps 1-2 and 2-3.
    assert_eq!(rec["edges"][0]["weight"], "1");
    assert_eq!(rec["edges"][1]["weight"], "3");
}

#[test]
fn detect_exit_code_tracks_confidence() {
    let dir = scratch("detect-codes");
    write(&dir, "m.model", NEURAL3);
    write(&dir, "hidden.graph", PATH3);
    assert_eq!(run_in(&dir, &["gen-w", "--mode", "gaussian", "--n", "3", "--seed", "7", "--out", "w.txt"]).code, 0);
    assert_eq!(run_in(&dir, &["build-table", "--model", "m.model", "--family", "all:3", "--w", "w.txt", "--out", "t.txt"]).code, 0);
    assert_eq!(run_in(&dir, &["solve-ss", "--model", "m.model", "--graph", "hidden.graph", "--w", "w.txt", "--out", "y.txt"]).code, 0);

    let r = run_in(&dir, &["detect", "--table", "t.txt", "--y", "y.txt", "--model", "m.model", "--json", "det.json"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(json(&dir, "det.json")["verdict"], "confident");

    // Push the measurement far off every table entry: ambiguous, exit 2.
    let mut corrupted = String::new();
    for line in read(&dir, "y.txt").lines() {
        if line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().unwrap();
        corrupted += &format!("{}\n", v + 10.0 * if corrupted.is_empty() { 1.0 } else { -1.0 });
    }
    write(&dir, "y_bad.txt", &corrupted);
    let r = run_in(&dir, &["detect", "--table", "t.txt", "--y", "y_bad.txt", "--json", "det_bad.json"]);
    assert_eq!(r.code, 2, "stdout: {} stderr: {}", r.stdout, r.stderr);
    assert_eq!(json(&dir, "det_bad.json")["verdict"], "ambiguous");
}

#[test]
fn stale_table_is_refused() {
    let dir = scratch("stale-table");
    write(&dir, "m.model", NEURAL3);
    write(&dir, "other.model", "model=neural\nn=3\ntau=0.55 0.95 0.8\nb=0.1\n");
    write(&dir, "hidden.graph", PATH3);
    assert_eq!(run_in(&dir, &["gen-w", "--mode", "gaussian", "--n", "3", "--seed", "7", "--out", "w.txt"]).code, 0);
    assert_eq!(run_in(&dir, &["build-table", "--model", "m.model", "--family", "all:3", "--w", "w.txt", "--out", "t.txt"]).code, 0);
    assert_eq!(run_in(&dir, &["solve-ss", "--model", "m.model", "--graph", "hidden.graph", "--w", "w.txt", "--out", "y.txt"]).code, 0);
    let r = run_in(&dir, &["detect", "--table", "t.txt", "--y", "y.txt", "--model", "other.model"]);
    assert_eq!(r.code, 1, "stdout: {}", r.stdout);
    assert!(r.stderr.contains("fingerprint"), "stderr: {}", r.stderr);
}

#[test]
fn reconstruct_decode_failures_exit_3() {
    let dir = scratch("decode-fail");
    write(&dir, "m.model", LTI3);
    write(&dir, "hidden.graph", PATH3);
    assert_eq!(run_in(&dir, &["gen-w", "--mode", "radix", "--model", "m.model", "--family", "all:3", "--out", "w.txt"]).code, 0);
    assert_eq!(run_in(&dir, &["solve-ss", "--model", "m.model", "--graph", "hidden.graph", "--w", "w.txt", "--out", "y_exact.txt"]).code, 0);
    // A real instrument reports decimals; the error claim applies to those.
    let mut decimal = String::new();
    for line in read(&dir, "y_exact.txt").lines() {
        if line.starts_with('#') {
            continue;
        }
        let v = match line.split_once('/') {
            Some((p, q)) => p.parse::<f64>().unwrap() / q.parse::<f64>().unwrap(),
            None => line.parse::<f64>().unwrap(),
        };
        decimal += &format!("{v:.16e}\n");
    }
    write(&dir, "y.txt", &decimal);

    // Claiming more measurement error than the digit budget tolerates.
    let r = run_in(&dir, &["reconstruct-lti", "--model", "m.model", "--w", "w.txt", "--y", "y.txt", "--claimed-err", "1.0"]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("decode failure"), "stderr: {}", r.stderr);

    // Outputs that never came from this model class fall off the digit grid.
    write(&dir, "junk.txt", "0.123456\n-0.9\n0.5\n");
    let r = run_in(&dir, &["reconstruct-lti", "--model", "m.model", "--w", "w.txt", "--y", "junk.txt", "--json", "fail.json"]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
    assert_eq!(json(&dir, "fail.json")["verdict"], "decode-failure");
}

#[test]
fn epsilon_reports_separation() {
    let dir = scratch("epsilon");
    write(&dir, "m.model", NEURAL3);
    assert_eq!(run_in(&dir, &["gen-w", "--mode", "gaussian", "--n", "3", "--seed", "2", "--out", "w.txt"]).code, 0);
    let r = run_in(&dir, &["epsilon", "--model", "m.model", "--family", "all:3", "--w", "w.txt", "--json", "eps.json"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("epsilon = "), "stdout: {}", r.stdout);
    let eps = json(&dir, "eps.json")["epsilon"].as_f64().unwrap();
    assert!(eps > 0.0);
}

#[test]
fn pipeline_radix_recovers_hidden_path() {
    let dir = scratch("pipe-radix");
    write(&dir, "m.model", LTI3);
    write(&dir, "hidden.graph", PATH3);
    let r = run_in(&dir, &["pipeline", "--model", "m.model", "--family", "all:3", "--hidden", "hidden.graph", "--mode", "radix", "--outdir", "out"]);
    assert_eq!(r.code, 0, "stdout: {} stderr: {}", r.stdout, r.stderr);
    let summary = json(&dir, "out/pipeline.json");
    assert_eq!(summary["match"], true);
    assert_eq!(summary["recovered_key"], "101");
}

#[test]
fn pipeline_table_detects_hidden_triangle() {
    let dir = scratch("pipe-table");
    write(&dir, "m.model", NEURAL3);
    write(&dir, "hidden.graph", TRIANGLE3);
    let r = run_in(&dir, &["pipeline", "--model", "m.model", "--family", "all:3", "--hidden", "hidden.graph", "--mode", "table", "--seed", "4", "--measure", "simulate", "--outdir", "out"]);
    assert_eq!(r.code, 0, "stdout: {} stderr: {}", r.stdout, r.stderr);
    let summary = json(&dir, "out/pipeline.json");
    assert_eq!(summary["verdict"], "confident");
    assert_eq!(summary["detected_key"], "111");
    assert!(dir.join("out/trajectory.csv").exists(), "simulated pipeline keeps its trajectory");
}

#[test]
fn pipeline_corrupted_measurement_is_ambiguous() {
    let dir = scratch("pipe-corrupt");
    write(&dir, "m.model", NEURAL3);
    write(&dir, "hidden.graph", PATH3);
    let r = run_in(&dir, &["pipeline", "--model", "m.model", "--family", "all:3", "--hidden", "hidden.graph", "--mode", "table", "--seed", "4", "--corrupt-y", "5.0", "--outdir", "out"]);
    assert_eq!(r.code, 2, "stdout: {} stderr: {}", r.stdout, r.stderr);
    assert_eq!(json(&dir, "out/pipeline.json")["verdict"], "ambiguous");
}

#[test]
fn simulate_writes_certified_trajectory() {
    let dir = scratch("simulate");
    write(&dir, "m.model", NEURAL3);
    write(&dir, "g.graph", PATH3);
    assert_eq!(run_in(&dir, &["gen-w", "--mode", "gaussian", "--n", "3", "--seed", "1", "--out", "w.txt"]).code, 0);
    let r = run_in(&dir, &["simulate", "--model", "m.model", "--graph", "g.graph", "--w", "w.txt", "--to-convergence", "--states", "--traj", "traj.csv", "--out", "y.txt"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("settled at t ="), "stdout: {}", r.stdout);
    assert!(r.stdout.contains("cross-check"), "stdout: {}", r.stdout);
    let traj = read(&dir, "traj.csv");
    let header = traj.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t,y1,y2,y3,x1,x2,x3");
    // Horizon mode and convergence mode are mutually exclusive.
    let r = run_in(&dir, &["simulate", "--model", "m.model", "--graph", "g.graph", "--w", "w.txt", "--t-end", "5", "--to-convergence"]);
    assert_eq!(r.code, 1);
}

#[test]
fn scenario_detects_cut_and_restore() {
    let dir = scratch("scenario");
    write(&dir, "m.model", NEURAL3);
    write(&dir, "g0.graph", PATH3);
    write(&dir, "g1.graph", "n=3\n1 2\n");
    assert_eq!(run_in(&dir, &["gen-w", "--mode", "gaussian", "--n", "3", "--seed", "5", "--out", "w.txt"]).code, 0);
    write(
        &dir,
        "sc.cfg",
        "model=m.model\nw=w.txt\nt_end=60\nrate_tol=1e-8\nresidual_tol=1e-8\n\
         t=0 graph=g0.graph\nt=20 graph=g1.graph\nt=40 graph=g0.graph\n",
    );
    let r = run_in(&dir, &["scenario", "--config", "sc.cfg", "--outdir", "out"]);
    assert_eq!(r.code, 0, "stdout: {} stderr: {}", r.stdout, r.stderr);
    let record = json(&dir, "out/segments.json");
    let segs = record["segments"].as_array().unwrap();
    assert_eq!(segs.len(), 3);
    for seg in segs {
        assert_eq!(seg["converged"], true);
        assert_eq!(seg["detection"]["confident"], true);
        assert_eq!(seg["detection"]["matches_schedule"], true);
    }
    assert_eq!(segs[0]["detection"]["graph_key"], segs[2]["detection"]["graph_key"]);
    let traj = read(&dir, "out/trajectory.csv");
    assert!(traj.lines().any(|l| l == "# t=20 graph=100"), "schedule comment present");
}

#[test]
fn outdir_env_redirects_relative_outputs() {
    let dir = scratch("outdir-env");
    std::fs::create_dir_all(dir.join("redirected")).unwrap();
    let out = Command::new(bin())
        .current_dir(&dir)
        .env("NETIDENT_OUTDIR", dir.join("redirected"))
        .args(["gen-w", "--mode", "gaussian", "--n", "2", "--seed", "1", "--out", "w.txt"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("redirected/w.txt").exists());
    assert!(!dir.join("w.txt").exists());
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let dir = scratch("usage");
    assert_eq!(run_in(&dir, &["detect", "--no-such-flag"]).code, 1);
    assert_eq!(run_in(&dir, &["--help"]).code, 0);
    assert_eq!(run_in(&dir, &["gen-w", "--help"]).code, 0);
    // Config errors (missing file) are exit 1, not a panic.
    let r = run_in(&dir, &["detect", "--table", "missing.txt", "--y", "nope.txt"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("error:"), "stderr: {}", r.stderr);
}
