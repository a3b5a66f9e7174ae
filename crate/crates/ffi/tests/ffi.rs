use std::ffi::{CStr, CString};
use std::fs;
use std::ptr;

use swarmzones_ffi::*;

fn last_error() -> String {
    let p = sz_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn bundled(name: &str) -> *mut SzScenario {
    let name = CString::new(name).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { sz_scenario_bundled(name.as_ptr(), &mut s) }, SzStatus::Ok);
    s
}

fn short_case4() -> *mut SzScenario {
    let text = swarmzones::sim::scenario::bundled_text("case4").unwrap();
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["duration"] = serde_json::json!(600);
    let json = CString::new(v.to_string()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { sz_scenario_from_json(json.as_ptr(), &mut s) }, SzStatus::Ok);
    s
}

#[test]
fn run_through_handles() {
    let s = short_case4();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(sz_run(s, &mut r), SzStatus::Ok);
        let mut events = 0;
        assert_eq!(sz_run_event_count(r, &mut events), SzStatus::Ok);
        assert!(events > 0);
        let mut json = ptr::null_mut();
        assert_eq!(sz_run_summary_json(r, &mut json), SzStatus::Ok);
        let summary: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(summary["events"].as_u64(), Some(events));
        assert_eq!(summary["duration"].as_u64(), Some(600));
        sz_string_free(json);
        sz_run_free(r);
        sz_scenario_free(s);
    }
}

#[test]
fn seeds_drive_the_run() {
    let s = bundled("case2");
    let summary = |seed: u64| unsafe {
        assert_eq!(sz_scenario_set_seed(s, seed), SzStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(sz_run(s, &mut r), SzStatus::Ok);
        let mut json = ptr::null_mut();
        sz_run_summary_json(r, &mut json);
        let text = CStr::from_ptr(json).to_string_lossy().into_owned();
        sz_string_free(json);
        sz_run_free(r);
        text
    };
    assert_eq!(summary(5), summary(5));
    assert_ne!(summary(5), summary(6));
    let mut seed = 0;
    assert_eq!(unsafe { sz_scenario_seed(s, &mut seed) }, SzStatus::Ok);
    assert_eq!(seed, 6);
    unsafe { sz_scenario_free(s) };
}

#[test]
fn invalid_scenarios_report_the_field() {
    let mut s = ptr::null_mut();
    let json = CString::new(r#"{"name":"Custom","seed":1,"duration":10,"grid":{"n":0,"tau":5.0,"layers":1},"fleet":{"drones":1},"plan":{"strategy":"FixedArea"}}"#).unwrap();
    assert_eq!(unsafe { sz_scenario_from_json(json.as_ptr(), &mut s) }, SzStatus::InvalidScenario);
    assert!(s.is_null());
    assert!(last_error().contains("grid"), "{}", last_error());

    let bad = CString::new("{").unwrap();
    assert_eq!(unsafe { sz_scenario_from_json(bad.as_ptr(), &mut s) }, SzStatus::InvalidScenario);

    let name = CString::new("case99").unwrap();
    assert_eq!(unsafe { sz_scenario_bundled(name.as_ptr(), &mut s) }, SzStatus::UnknownScenario);
    assert!(last_error().contains("case99"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(sz_scenario_from_json(ptr::null(), &mut s), SzStatus::NullOrInvalidArgument);
        assert_eq!(sz_run(ptr::null(), ptr::null_mut()), SzStatus::NullOrInvalidArgument);
        assert_eq!(sz_scenario_set_seed(ptr::null_mut(), 1), SzStatus::NullOrInvalidArgument);
        assert_eq!(sz_run_write(ptr::null(), ptr::null(), SzFormat::Csv), SzStatus::NullOrInvalidArgument);
        sz_run_free(ptr::null_mut());
        sz_scenario_free(ptr::null_mut());
        sz_string_free(ptr::null_mut());
    }
}

#[test]
fn successful_call_clears_the_error() {
    let mut v = 0;
    unsafe {
        assert_eq!(sz_zone_value(5, 0, 3, &mut v), SzStatus::OutOfRange);
        assert!(!sz_last_error().is_null());
        assert_eq!(sz_zone_value(1, 1, 3, &mut v), SzStatus::Ok);
    }
    assert!(sz_last_error().is_null());
    assert_eq!(v, 4);
}

#[test]
fn throughput_and_zone_values() {
    let mut bps = 0.0;
    unsafe {
        assert_eq!(sz_throughput(1000, 0.01, 0.05, &mut bps), SzStatus::Ok);
        assert!((bps - 40_550_400.0).abs() < 1e-6);
        assert_eq!(sz_throughput(1, 1.5, 1.0, &mut bps), SzStatus::OutOfRange);
    }
    for n in 1..8 {
        let mut seen = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                let mut v = usize::MAX;
                assert_eq!(unsafe { sz_zone_value(a, b, n, &mut v) }, SzStatus::Ok);
                seen[v] = true;
            }
        }
        assert!(seen.into_iter().all(|x| x));
    }
}

#[test]
fn writes_exports() {
    let s = short_case4();
    let dir = std::env::temp_dir().join(format!("swarmzones-ffi-{}", std::process::id()));
    let c_dir = CString::new(dir.to_str().unwrap()).unwrap();
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(sz_run(s, &mut r), SzStatus::Ok);
        assert_eq!(sz_run_write(r, c_dir.as_ptr(), SzFormat::Json), SzStatus::Ok);
        sz_run_free(r);
        sz_scenario_free(s);
    }
    for f in ["manifest.json", "events.ndjson", "ped.ndjson", "density.csv", "summary.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(sz_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
