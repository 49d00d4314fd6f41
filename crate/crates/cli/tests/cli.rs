use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn otmap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otmap"))
        .args(args)
        .current_dir(dir)
        .env_remove("OTMAP_SEED")
        .output()
        .expect("spawn otmap")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = otmap(args, dir);
    assert!(
        out.status.success(),
        "otmap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let out = otmap(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["gen-data", "fit-fourier", "fit-nn", "fit-nnplan", "transport", "sim7", "fixture-lb", "fda", "eval"] {
        assert!(text.contains(cmd), "help lacks {cmd}");
    }
}

#[test]
fn unknown_flag_exits_one_and_names_it() {
    let tmp = TempDir::new().unwrap();
    let out = otmap(&["gen-data", "--d", "2", "--n", "5", "--out", "x", "--frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--frobnicate"));
}

#[test]
fn missing_study_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = otmap(&["sim7", "--estimator", "linear", "--q", "1", "--out", "r.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--d"));
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    ok(&["gen-data", "--d", "2", "--n", "20", "--seed", "42", "--out", "a"], tmp.path());
    let out = Command::new(env!("CARGO_BIN_EXE_otmap"))
        .args(["gen-data", "--d", "2", "--n", "20", "--out", "b"])
        .current_dir(tmp.path())
        .env("OTMAP_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    let read = |p: &str| fs::read(tmp.path().join(p)).unwrap();
    assert_eq!(read("a/x.csv"), read("b/x.csv"));
    assert_eq!(read("a/y.csv"), read("b/y.csv"));
    ok(&["gen-data", "--d", "2", "--n", "20", "--seed", "43", "--out", "c"], tmp.path());
    assert_ne!(read("a/x.csv"), read("c/x.csv"));
}

#[test]
fn run_echo_records_checksums_and_version() {
    let tmp = TempDir::new().unwrap();
    ok(&["gen-data", "--d", "2", "--n", "30", "--out", "data"], tmp.path());
    ok(&["fit-nnplan", "--x", "data/x.csv", "--y", "data/y.csv", "--out", "plan.json"], tmp.path());
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("plan.config.json")).unwrap()).unwrap();
    assert_eq!(echo["command"], "fit-nnplan");
    assert_eq!(echo["library_version"], env!("CARGO_PKG_VERSION"));
    let inputs = echo["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert!(inputs.iter().all(|i| i["sha256"].as_str().unwrap().len() == 64));
    assert!(tmp.path().join("plan.timing.json").exists());
}

#[test]
fn saved_model_transports_like_its_fit() {
    let tmp = TempDir::new().unwrap();
    ok(&["gen-data", "--d", "3", "--n", "40", "--out", "data"], tmp.path());
    ok(&["fit-nnplan", "--x", "data/x.csv", "--y", "data/y.csv", "--out", "plan.json"], tmp.path());
    ok(&["transport", "--model", "plan.json", "--x", "data/x.csv", "--out", "t.csv"], tmp.path());
    // On its own source atoms the plug-in map returns the assigned targets, which
    // are a permutation of the target rows.
    let mut moved: Vec<String> = fs::read_to_string(tmp.path().join("t.csv")).unwrap().lines().map(String::from).collect();
    let mut targets: Vec<String> =
        fs::read_to_string(tmp.path().join("data/y.csv")).unwrap().lines().map(String::from).collect();
    moved.sort();
    targets.sort();
    assert_eq!(moved, targets);
}

#[test]
fn corrupted_model_exits_two_with_location() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.json"), "{\"format_version\": 1,\n  \"model\": {").unwrap();
    let out = otmap(&["eval", "--model", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn version_mismatch_exits_two_with_hint() {
    let tmp = TempDir::new().unwrap();
    ok(&["gen-data", "--d", "2", "--n", "10", "--out", "data"], tmp.path());
    ok(&["fit-nnplan", "--x", "data/x.csv", "--y", "data/y.csv", "--out", "plan.json"], tmp.path());
    let p = tmp.path().join("plan.json");
    let text = fs::read_to_string(&p).unwrap().replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    fs::write(&p, text).unwrap();
    let out = otmap(&["transport", "--model", "plan.json", "--x", "data/x.csv", "--out", "t.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("expects version 1"), "{}", stderr(&out));
}

#[test]
fn malformed_csv_exits_two() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("x.csv"), "0.1,0.2\n0.3,oops\n").unwrap();
    let out = otmap(&["fit-nnplan", "--x", "x.csv", "--y", "x.csv", "--out", "p.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2, column 2"), "{}", stderr(&out));
}

#[test]
fn tiny_sim7_runs_quickly_and_replays_bitwise() {
    let tmp = TempDir::new().unwrap();
    let start = Instant::now();
    ok(
        &["sim7", "--estimator", "nn", "--q", "1", "--d", "5", "--ns", "50,100", "--seeds", "2", "--seed", "9", "--out", "a/report.json"],
        tmp.path(),
    );
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "tiny sim7 took {secs:.1} s");
    let errors = fs::read_to_string(tmp.path().join("a/errors.csv")).unwrap();
    let mut lines = errors.lines();
    assert_eq!(lines.next(), Some("estimator,q,d,n,seed,error,se"));
    assert_eq!(lines.count(), 4);
    assert!(tmp.path().join("a/mean_errors.csv").exists());

    ok(&["sim7", "--config", "a/report.config.json", "--threads", "1", "--out", "b/report.json"], tmp.path());
    for f in ["report.json", "errors.csv", "mean_errors.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs on replay");
    }
}

#[test]
fn replay_conflicts_with_study_flags() {
    let tmp = TempDir::new().unwrap();
    let out = otmap(&["sim7", "--config", "c.json", "--d", "3", "--out", "r.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

/// Writes `n` curves on a 65-point grid, first row the abscissae, moved by
/// `shift · cos(πt)` (the constant mode is not part of the coefficient system).
fn write_curves(path: &Path, n: usize, shift: f64, phase: f64) {
    let grid: Vec<f64> = (0..65).map(|i| i as f64 / 64.0).collect();
    let mut s = grid.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
    for k in 0..n {
        let amp = 0.5 + 0.5 * ((k as f64 * 0.618 + phase).fract());
        let row: Vec<String> = grid
            .iter()
            .map(|t| {
                let pi = std::f64::consts::PI;
                (amp * (2.0 * pi * t).cos() + shift * (pi * t).cos()).to_string()
            })
            .collect();
        s.push('\n');
        s.push_str(&row.join(","));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn fda_shift_task_halves_avg_dtw() {
    let tmp = TempDir::new().unwrap();
    write_curves(&tmp.path().join("src.csv"), 40, 0.0, 0.0);
    write_curves(&tmp.path().join("tgt.csv"), 40, 0.4, 0.3);
    ok(
        &["fda", "--source", "src.csv", "--target", "tgt.csv", "--n-coeffs", "8", "--out", "moved.csv"],
        tmp.path(),
    );
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("moved.metrics.json")).unwrap()).unwrap();
    let reduction = m["reduction"].as_f64().unwrap();
    assert!(reduction >= 0.5, "Avg-DTW reduction {reduction}");
    let moved = fs::read_to_string(tmp.path().join("moved.csv")).unwrap();
    assert_eq!(moved.lines().count(), 41);
    assert!(tmp.path().join("moved.model.json").exists());
}

#[test]
fn fda_plane_mode_uses_sidecar() {
    let tmp = TempDir::new().unwrap();
    let (rows, cols) = (6, 7);
    let mut src = String::new();
    let mut tgt = String::new();
    for k in 0..12 {
        let a = 0.3 + 0.05 * k as f64;
        let vals = |shift: f64| -> String {
            (0..rows * cols)
                .map(|p| {
                    let (r, c) = ((p / cols) as f64 / (rows - 1) as f64, (p % cols) as f64 / (cols - 1) as f64);
                    (a * (std::f64::consts::PI * r).cos() * (std::f64::consts::PI * c).cos() + shift).to_string()
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        src.push_str(&vals(0.0));
        src.push('\n');
        tgt.push_str(&vals(0.2));
        tgt.push('\n');
    }
    fs::write(tmp.path().join("s.csv"), src).unwrap();
    fs::write(tmp.path().join("t.csv"), tgt).unwrap();
    fs::write(tmp.path().join("plane.json"), "{\"rows\": 6, \"cols\": 7}").unwrap();
    ok(
        &["fda", "--source", "s.csv", "--target", "t.csv", "--plane", "plane.json", "--n-coeffs", "3", "--out", "m.csv"],
        tmp.path(),
    );
    let moved = fs::read_to_string(tmp.path().join("m.csv")).unwrap();
    assert_eq!(moved.lines().count(), 12);
    assert!(moved.lines().all(|l| l.split(',').count() == rows * cols));
}

#[test]
fn fixture_command_writes_report() {
    let tmp = TempDir::new().unwrap();
    ok(&["fixture-lb", "--d", "2", "--S", "1", "--k", "4", "--mc", "5000", "--out", "lb.json"], tmp.path());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("lb.json")).unwrap()).unwrap();
    assert!(r["min_separation"].as_f64().unwrap() > 0.0);
}
