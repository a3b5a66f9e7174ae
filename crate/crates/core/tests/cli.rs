use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarmzones"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("swarmzones-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run_case(scenario: &str, out: &Path, extra: &[&str]) -> Output {
    bin().args(["run", "--scenario", scenario, "--out"]).arg(out).args(extra).output().unwrap()
}

fn scenario_file(name: &str) -> String {
    format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_writes_manifest_and_exports() {
    let out = scratch("run");
    let o = run_case(&scenario_file("case2"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    for f in ["events.csv", "metrics.csv", "zone_stats.csv", "density.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f} missing");
        assert!(manifest["files"].as_array().unwrap().iter().any(|v| v == f), "{f} not in manifest");
    }
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.starts_with("# scenario_hash="));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["events"].as_u64().unwrap() > 0);
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn equal_seeds_give_identical_files() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for dir in [&a, &b] {
        let o = run_case("case4", dir, &["--seed", "7", "--format", "json"]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["events.ndjson", "metrics.ndjson", "zone_stats.ndjson", "ped.ndjson", "density.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let seed = scratch("det-c");
    run_case("case4", &seed, &["--seed", "8", "--format", "json"]);
    assert_ne!(fs::read(a.join("events.ndjson")).unwrap(), fs::read(seed.join("events.ndjson")).unwrap());
    for d in [a, b, seed] {
        fs::remove_dir_all(d).unwrap();
    }
}

#[test]
fn malformed_scenario_exits_1() {
    let dir = scratch("bad");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    let mut s: serde_json::Value = serde_json::from_str(&fs::read_to_string(scenario_file("case2")).unwrap()).unwrap();
    s["grid"]["n"] = serde_json::json!(0);
    fs::write(&path, s.to_string()).unwrap();
    let o = run_case(path.to_str().unwrap(), &dir.join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid"));

    fs::write(&path, "{ not json").unwrap();
    assert_eq!(run_case(path.to_str().unwrap(), &dir.join("out"), &[]).status.code(), Some(1));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_scenario_exits_2() {
    let dir = scratch("missing");
    let o = run_case("/nonexistent/scenario.json", &dir, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_figure_exits_1() {
    let dir = scratch("fig");
    let o = bin().args(["reproduce", "--figure", "fig99", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig17"));
}

#[test]
fn reproduce_writes_csv_and_summary() {
    let dir = scratch("fig17");
    let o = bin().args(["reproduce", "--figure", "fig17", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.join("fig17.csv")).unwrap();
    assert!(csv.starts_with("x,y,series\n"));
    let summary = fs::read_to_string(dir.join("fig17_summary.txt")).unwrap();
    assert!(summary.contains("overall: PASS"));
    assert!(dir.join("manifest.json").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_passes() {
    let o = bin().args(["verify"]).env("SWARMZONES_THREADS", "2").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.ends_with("ok")).count(), 4, "{text}");
}
