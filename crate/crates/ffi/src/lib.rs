//! C interface to the simulator.
//!
//! Scenarios and runs are opaque handles created and destroyed through this
//! API. Every fallible call returns an [`SzStatus`]; on failure a message is
//! kept per thread and can be fetched with [`sz_last_error`]. Strings
//! returned to the caller are owned by the caller and released with
//! [`sz_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use swarmzones::metrics::{throughput, LinkSample};
use swarmzones::sim::export::{write_run, Format};
use swarmzones::sim::scenario::bundled_text;
use swarmzones::sim::{run, RunOutput, Scenario, ValidationError};
use swarmzones::zone_grid::drone_zone_value;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzStatus {
    Ok = 0,
    /// a required pointer was null or a string was not UTF-8
    NullOrInvalidArgument = 1,
    InvalidScenario = 2,
    UnknownScenario = 3,
    Io = 4,
    /// an argument was outside its domain
    OutOfRange = 5,
    Internal = 6,
}

/// Export format for [`sz_run_write`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzFormat {
    Csv = 0,
    Json = 1,
}

/// A validated scenario.
pub struct SzScenario {
    scenario: Scenario,
    /// text the scenario was parsed from; its hash tags the exports
    text: String,
}

/// The complete output of one run.
pub struct SzRun {
    output: RunOutput,
    scenario_hash: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), (SzStatus, String)>) -> SzStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SzStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            SzStatus::Internal
        }
    }
}

fn bad_arg(what: &str) -> (SzStatus, String) {
    (SzStatus::NullOrInvalidArgument, format!("{what} is null or not valid UTF-8"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SzStatus, String)> {
    if p.is_null() {
        return Err(bad_arg(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad_arg(what))
}

fn joined(errs: &[ValidationError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn parse(text: &str) -> Result<Box<SzScenario>, (SzStatus, String)> {
    let scenario = Scenario::from_json(text).map_err(|errs| (SzStatus::InvalidScenario, joined(&errs)))?;
    Ok(Box::new(SzScenario { scenario, text: text.to_string() }))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn sz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn sz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates scenario JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_scenario_from_json(json: *const c_char, out: *mut *mut SzScenario) -> SzStatus {
    guard(|| {
        if out.is_null() {
            return Err(bad_arg("out"));
        }
        let s = parse(str_arg(json, "json")?)?;
        *out = Box::into_raw(s);
        Ok(())
    })
}

/// Loads one of the scenarios shipped with the library by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_scenario_bundled(name: *const c_char, out: *mut *mut SzScenario) -> SzStatus {
    guard(|| {
        if out.is_null() {
            return Err(bad_arg("out"));
        }
        let name = str_arg(name, "name")?;
        let text = bundled_text(name).ok_or_else(|| (SzStatus::UnknownScenario, format!("no bundled scenario {name}")))?;
        *out = Box::into_raw(parse(text)?);
        Ok(())
    })
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn sz_scenario_set_seed(s: *mut SzScenario, seed: u64) -> SzStatus {
    guard(|| {
        let s = s.as_mut().ok_or_else(|| bad_arg("scenario"))?;
        s.scenario.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_scenario_seed(s: *const SzScenario, out: *mut u64) -> SzStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| bad_arg("scenario"))?;
        let out = out.as_mut().ok_or_else(|| bad_arg("out"))?;
        *out = s.scenario.seed;
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sz_scenario_free(s: *mut SzScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs a scenario to completion. The scenario handle stays usable.
///
/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_run(s: *const SzScenario, out: *mut *mut SzRun) -> SzStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| bad_arg("scenario"))?;
        if out.is_null() {
            return Err(bad_arg("out"));
        }
        let output = run(&s.scenario).map_err(|errs| (SzStatus::InvalidScenario, joined(&errs)))?;
        *out = Box::into_raw(Box::new(SzRun { output, scenario_hash: Scenario::content_hash(&s.text) }));
        Ok(())
    })
}

/// Number of events in the run's log.
///
/// # Safety
/// `r` must be a live run handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_run_event_count(r: *const SzRun, out: *mut u64) -> SzStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| bad_arg("run"))?;
        let out = out.as_mut().ok_or_else(|| bad_arg("out"))?;
        *out = r.output.log.len() as u64;
        Ok(())
    })
}

/// Mean link throughput of the run in bits per second.
///
/// # Safety
/// `r` must be a live run handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_run_mean_throughput(r: *const SzRun, out: *mut f64) -> SzStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| bad_arg("run"))?;
        let out = out.as_mut().ok_or_else(|| bad_arg("out"))?;
        *out = r.output.summary.mean_throughput;
        Ok(())
    })
}

/// Run summary as a JSON object. Free the result with [`sz_string_free`].
///
/// # Safety
/// `r` must be a live run handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_run_summary_json(r: *const SzRun, out: *mut *mut c_char) -> SzStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| bad_arg("run"))?;
        if out.is_null() {
            return Err(bad_arg("out"));
        }
        let text = serde_json::to_string(&r.output.summary).map_err(|e| (SzStatus::Internal, e.to_string()))?;
        *out = owned_string(text);
        Ok(())
    })
}

/// Writes the run's manifest and exports into `dir`, creating it if needed.
///
/// # Safety
/// `r` must be a live run handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sz_run_write(r: *const SzRun, dir: *const c_char, format: SzFormat) -> SzStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| bad_arg("run"))?;
        let dir = str_arg(dir, "dir")?;
        let format = match format {
            SzFormat::Csv => Format::Csv,
            SzFormat::Json => Format::Json,
        };
        let label = format!("{:?}", r.output.scenario.name);
        write_run(&r.output, &label, &r.scenario_hash, Path::new(dir), format)
            .map(|_| ())
            .map_err(|e| (SzStatus::Io, format!("writing to {dir}: {e}")))
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `r` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sz_run_free(r: *mut SzRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Diagonal ordinal of cell `(a, b)` on an `n × n` grid.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_zone_value(a: usize, b: usize, n: usize, out: *mut usize) -> SzStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| bad_arg("out"))?;
        *out = drone_zone_value(a, b, n).map_err(|e| (SzStatus::OutOfRange, e.to_string()))?;
        Ok(())
    })
}

/// Bits per second delivered by `packets` packets at bit error ratio `ber`
/// over `seconds`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sz_throughput(packets: u64, ber: f64, seconds: f64, out: *mut f64) -> SzStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| bad_arg("out"))?;
        let sample = LinkSample::new(packets, ber, seconds).map_err(|e| (SzStatus::OutOfRange, e.to_string()))?;
        *out = throughput(&sample);
        Ok(())
    })
}
