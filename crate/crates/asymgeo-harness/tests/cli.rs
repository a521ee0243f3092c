use std::path::Path;
use std::process::{Command, Output};

use asymgeo_harness::formats;
use asymgeo_harness::report::Report;

fn asymgeo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asymgeo"))
        .args(args)
        .current_dir(dir)
        .env_remove("ASYMGEO_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = asymgeo(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    ok(&["gen", "points", "--n", "4", "--k", "2", "--seed", "7", "--out", "a.txt"], d.path());
    ok(&["gen", "points", "--n", "4", "--k", "2", "--seed", "7", "--out", "b.txt"], d.path());
    let a = std::fs::read(d.path().join("a.txt")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("b.txt")).unwrap());
    assert_eq!(formats::parse_points(std::str::from_utf8(&a).unwrap()).unwrap().len(), 4);
}

#[test]
fn gen_one_interval() {
    let d = tempfile::tempdir().unwrap();
    ok(&["gen", "intervals", "--n", "1", "--out", "i.txt"], d.path());
    let ivs = formats::parse_intervals(&std::fs::read_to_string(d.path().join("i.txt")).unwrap()).unwrap();
    assert_eq!(ivs.len(), 1);
    assert!(ivs[0].lo <= ivs[0].hi);
}

#[test]
fn gen_queries_stay_in_the_data_box() {
    let d = tempfile::tempdir().unwrap();
    ok(&["gen", "points", "--n", "50", "--k", "3", "--out", "p.txt"], d.path());
    ok(&["gen", "queries", "--n", "10", "--from", "p.txt", "--out", "q.txt"], d.path());
    let pts = formats::parse_points(&std::fs::read_to_string(d.path().join("p.txt")).unwrap()).unwrap();
    let boxes = formats::parse_boxes(&std::fs::read_to_string(d.path().join("q.txt")).unwrap()).unwrap();
    assert_eq!(boxes.len(), 10);
    for b in &boxes {
        assert_eq!(b.lo.len(), 3);
        for dim in 0..3 {
            let lo = pts.iter().map(|p| p.coords[dim]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.coords[dim]).fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= b.lo[dim] && b.lo[dim] <= b.hi[dim] && b.hi[dim] <= hi);
        }
    }
}

#[test]
fn gen_rejects_zero_and_bad_paths() {
    let d = tempfile::tempdir().unwrap();
    assert!(!asymgeo(&["gen", "points", "--n", "0", "--out", "x"], d.path()).status.success());
    assert!(!asymgeo(&["gen", "points", "--n", "3", "--out", "no/such/dir/x"], d.path()).status.success());
}

#[test]
fn verify_suites_pass() {
    let d = tempfile::tempdir().unwrap();
    let json = ok(&["verify", "kd", "--seed", "1"], d.path());
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 5);
    ok(&["verify", "aug", "--alpha", "2", "--n", "300"], d.path());
    ok(&["verify", "trace", "--n", "300"], d.path());
}

#[test]
fn verify_unknown_suite_fails() {
    let d = tempfile::tempdir().unwrap();
    assert!(!asymgeo(&["verify", "bogus"], d.path()).status.success());
}

#[test]
fn verify_dt_reports_a_cocircular_corpus() {
    let d = tempfile::tempdir().unwrap();
    let mut text = String::from("2 6\n");
    for (i, (x, y)) in [(0.1, 0.1), (0.9, 0.15), (0.45, 0.49), (0.55, 0.49), (0.55, 0.59), (0.45, 0.59)]
        .iter()
        .enumerate()
    {
        text += &format!("{x} {y} {i}\n");
    }
    std::fs::write(d.path().join("sq.txt"), text).unwrap();
    let json = ok(&["verify", "dt", "--points", "sq.txt"], d.path());
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["checks"][0]["detail"].as_str().unwrap().contains("cocircular"));
}

#[test]
fn verify_dt_writes_mesh_and_round_log() {
    let d = tempfile::tempdir().unwrap();
    ok(&["verify", "dt", "--n", "200", "--off", "m.off", "--rounds-log", "r.json"], d.path());
    let off = std::fs::read_to_string(d.path().join("m.off")).unwrap();
    assert!(off.starts_with("OFF"));
    let rounds: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("r.json")).unwrap()).unwrap();
    assert!(!rounds.as_array().unwrap().is_empty());
}

#[test]
fn verify_replays_an_ops_script() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("init.txt"), "0 1 0\n2 3 1\n").unwrap();
    std::fs::write(d.path().join("ops.txt"), "Q 0.5\nI 0.2 2.5\nQ 2.2\nD 1\nQ 2.2\n").unwrap();
    let json = ok(&["verify", "aug", "--tree", "interval", "--ops", "ops.txt", "--data", "init.txt"], d.path());
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let ids: Vec<serde_json::Value> = v["answers"].as_array().unwrap().iter().map(|a| a["ids"].clone()).collect();
    assert_eq!(ids, vec![serde_json::json!([0]), serde_json::json!([1, 2]), serde_json::json!([2])]);
}

#[test]
fn bench_is_deterministic_and_merges() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("spec.json"),
        r#"{"subject":"sort-prefix","sizes":[256,512],"params":{"seed":3}}"#,
    )
    .unwrap();
    ok(&["bench", "spec.json", "--out", "a"], d.path());
    ok(&["bench", "spec.json", "--out", "b"], d.path());
    let read = |f: &str| -> Report { serde_json::from_str(&std::fs::read_to_string(d.path().join(f)).unwrap()).unwrap() };
    let (a, b) = (read("a.json"), read("b.json"));
    assert_eq!(a.canonical(), b.canonical());
    assert_eq!(a.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![256, 512]);
    let csv = std::fs::read_to_string(d.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    ok(&["report-merge", "a.json", "b.json", "--out", "m"], d.path());
    let merged = std::fs::read_to_string(d.path().join("m.csv")).unwrap();
    assert_eq!(merged.lines().count(), 5);
}

#[test]
fn seed_env_overrides_the_spec() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("spec.json"), r#"{"subject":"kd-build","sizes":[128],"params":{"seed":3}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_asymgeo"))
        .args(["bench", "spec.json", "--out", "e"])
        .env("ASYMGEO_SEED", "9")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let r: Report = serde_json::from_str(&std::fs::read_to_string(d.path().join("e.json")).unwrap()).unwrap();
    assert_eq!(r.environment.seed, 9);
}

#[test]
fn bench_runs_a_single_criterion() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(&["bench", "--criterion", "12", "--out", "c"], d.path());
    assert!(out.starts_with("PASS criterion 12"));
    assert!(d.path().join("c.json").exists());
}
