//! Builds a small C program against the generated header and the static
//! library, then runs it.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "swarmzones.h"

static int fail(const char *what) {
    const char *e = sz_last_error();
    fprintf(stderr, "%s: %s\n", what, e ? e : "(no message)");
    return 1;
}

int main(void) {
    SzScenario *s = NULL;
    if (sz_scenario_bundled("case3", &s) != SZ_STATUS_OK) return fail("bundled");
    if (sz_scenario_set_seed(s, 11) != SZ_STATUS_OK) return fail("seed");
    SzRun *r = NULL;
    if (sz_run(s, &r) != SZ_STATUS_OK) return fail("run");
    uint64_t events = 0;
    if (sz_run_event_count(r, &events) != SZ_STATUS_OK || events == 0) return fail("events");
    char *json = NULL;
    if (sz_run_summary_json(r, &json) != SZ_STATUS_OK || strstr(json, "\"events\"") == NULL) return fail("summary");
    sz_string_free(json);
    sz_run_free(r);
    sz_scenario_free(s);

    if (sz_scenario_bundled("nope", &s) != SZ_STATUS_UNKNOWN_SCENARIO) return 2;
    if (sz_last_error() == NULL) return 3;

    size_t v = 0;
    if (sz_zone_value(1, 1, 3, &v) != SZ_STATUS_OK || v != 4) return 4;
    printf("ok %llu events\n", (unsigned long long)events);
    return 0;
}
"#;

/// Directory holding this crate's build outputs, next to the test binary.
fn artifact_dir() -> PathBuf {
    let exe = env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn find_static_lib(dir: &Path) -> Option<PathBuf> {
    [dir.join("libswarmzones_ffi.a"), dir.join("deps").join("libswarmzones_ffi.a")].into_iter().find(|p| p.exists())
}

#[test]
fn c_program_links_and_runs() {
    let lib = find_static_lib(&artifact_dir()).expect("static library is built alongside the tests");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("swarmzones.h").exists(), "header not generated");
    let cc = env::var("CC").unwrap_or_else(|_| "cc".to_string());

    let work = env::temp_dir().join(format!("swarmzones-c-{}", std::process::id()));
    fs::create_dir_all(&work).unwrap();
    let src = work.join("main.c");
    let exe = work.join("main");
    fs::write(&src, PROGRAM).unwrap();
    let built = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap_or_else(|e| panic!("running {cc}: {e}"));
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));

    let ran = Command::new(&exe).output().unwrap();
    assert!(ran.status.success(), "exit {:?}: {}", ran.status.code(), String::from_utf8_lossy(&ran.stderr));
    assert!(String::from_utf8_lossy(&ran.stdout).starts_with("ok "));
    fs::remove_dir_all(&work).unwrap();
}
