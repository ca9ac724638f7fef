use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_public_surface() {
    let h = std::fs::read_to_string(crate_dir().join("include/hrbench.h")).unwrap();
    for f in [
        "hrb_last_error_message",
        "hrb_series_synth",
        "hrb_series_load",
        "hrb_series_len",
        "hrb_series_values",
        "hrb_series_free",
        "hrb_metrics",
        "hrb_bench_run",
        "hrb_report_csv",
        "hrb_report_table",
        "hrb_report_failure_count",
        "hrb_string_free",
        "hrb_report_free",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct HrbSeries HrbSeries;"));
    assert!(h.contains("typedef struct HrbReport HrbReport;"));
    assert!(h.contains("HRB_STATUS_OK = 0"));
    assert!(h.contains("HRB_STATUS_BUFFER_TOO_SMALL"));
}

fn find_static_lib() -> Option<PathBuf> {
    let target = crate_dir().join("../../target/debug");
    let direct = target.join("libhrbench_ffi.a");
    if direct.exists() {
        return Some(direct);
    }
    std::fs::read_dir(target.join("deps"))
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("libhrbench_ffi") && n.ends_with(".a"))
        })
        .max_by_key(|p| p.metadata().and_then(|m| m.modified()).ok())
}

fn have(tool: &str) -> bool {
    Command::new(tool).arg("--version").output().is_ok()
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    if !have("cc") {
        eprintln!("skipping: no C compiler");
        return;
    }
    let Some(lib) = find_static_lib() else {
        eprintln!("skipping: static library not built");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir().join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(Path::new(&exe)).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "smoke failed: {stdout} {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("len=300"));
    assert!(stdout.contains("mae=15.000000"));
    assert!(stdout.contains("status=4"));
}
