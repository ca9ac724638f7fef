//! C ABI over `hrbench-core`.
//!
//! Every fallible call returns an [`HrbStatus`]; on anything other than
//! `HRB_STATUS_OK` the calling thread's [`hrb_last_error_message`] holds a
//! description. Handles are opaque and owned by the caller once returned;
//! each has exactly one matching `_free` function.

use hrbench_core::bench::{cmd_bench, parse_config_text, BenchConfig};
use hrbench_core::dataset::{load_series, synth_series, SeriesFormat, SynthProfile, TimeSeries};
use hrbench_core::eval::{mae, mape, render_table, rmse};
use hrbench_core::Error;
use libc::c_char;
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Io = 5,
    Ingestion = 6,
    InsufficientData = 7,
    Numeric = 8,
    Training = 9,
    Evaluation = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HrbMetrics {
    pub mae: f64,
    pub mape: f64,
    pub rmse: f64,
}

/// Opaque heart-rate series.
pub struct HrbSeries {
    inner: TimeSeries,
}

/// Opaque result of a bench run.
pub struct HrbReport {
    csv: CString,
    table: CString,
    failures: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HrbStatus {
    match e {
        Error::Dimension(_) | Error::Input(_) => HrbStatus::InvalidArgument,
        Error::Ingestion { .. } => HrbStatus::Ingestion,
        Error::Io { .. } => HrbStatus::Io,
        Error::DegenerateStatistics(_) | Error::DegenerateRange(_) | Error::DivisionDomain(_) => HrbStatus::Numeric,
        Error::InsufficientData { .. } => HrbStatus::InsufficientData,
        Error::FitFailure { .. } | Error::Divergence(_) => HrbStatus::Training,
        Error::Config(_) => HrbStatus::Config,
        Error::Evaluation(_) => HrbStatus::Evaluation,
    }
}

struct Fail(HrbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, records any error or panic for the calling thread.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HrbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HrbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HrbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(HrbStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: caller guarantees a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| Fail(HrbStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(HrbStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hrb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Generates a synthetic series. `profile` is `quasi_periodic`,
/// `trend_shift` or `ar1`.
///
/// # Safety
/// `profile` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrb_series_synth(
    profile: *const c_char,
    seed: u64,
    length: usize,
    out: *mut *mut HrbSeries,
) -> HrbStatus {
    guard(|| {
        out_arg(out, "out")?;
        let profile: SynthProfile = unsafe { str_arg(profile, "profile") }?.parse()?;
        let inner = synth_series(seed, length, profile)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(HrbSeries { inner })) };
        Ok(())
    })
}

/// Loads a series file: CSV with a `bpm` column when the name ends in
/// `.csv`, otherwise one reading per line.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrb_series_load(
    path: *const c_char,
    interval_seconds: f64,
    out: *mut *mut HrbSeries,
) -> HrbStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = Path::new(unsafe { str_arg(path, "path") }?);
        let inner = load_series(path, SeriesFormat::from_path(path), interval_seconds)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(HrbSeries { inner })) };
        Ok(())
    })
}

/// Number of readings; 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hrb_series_len(series: *const HrbSeries) -> usize {
    // SAFETY: caller guarantees null or a live handle.
    unsafe { series.as_ref() }.map_or(0, |s| s.inner.len())
}

/// Copies the readings into `buf`. Fails with `BUFFER_TOO_SMALL` when
/// `capacity` is below the series length; `written` then holds the length
/// required.
///
/// # Safety
/// `series` must be a live handle; `buf` must hold `capacity` doubles;
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrb_series_values(
    series: *const HrbSeries,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> HrbStatus {
    guard(|| {
        out_arg(written, "written")?;
        // SAFETY: caller guarantees null or a live handle.
        let s = unsafe { series.as_ref() }.ok_or_else(|| Fail(HrbStatus::NullPointer, "series is null".into()))?;
        let values = s.inner.values();
        // SAFETY: checked non-null above.
        unsafe { *written = values.len() };
        if capacity < values.len() {
            return Err(Fail(
                HrbStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, series has {}", values.len()),
            ));
        }
        out_arg(buf, "buf")?;
        // SAFETY: buf holds at least `capacity` ≥ len doubles.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len()) };
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hrb_series_free(series: *mut HrbSeries) {
    if !series.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(series) });
    }
}

/// MAE, MAPE (as a fraction) and RMSE of `n` paired values.
///
/// # Safety
/// `y` and `yhat` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrb_metrics(y: *const f64, yhat: *const f64, n: usize, out: *mut HrbMetrics) -> HrbStatus {
    guard(|| {
        out_arg(out, "out")?;
        if y.is_null() || yhat.is_null() {
            return Err(Fail(HrbStatus::NullPointer, "value arrays must not be null".into()));
        }
        // SAFETY: caller guarantees n readable doubles in each array.
        let (y, yhat) = unsafe { (std::slice::from_raw_parts(y, n), std::slice::from_raw_parts(yhat, n)) };
        let m = HrbMetrics { mae: mae(y, yhat)?, mape: mape(y, yhat)?, rmse: rmse(y, yhat)? };
        // SAFETY: checked non-null above.
        unsafe { *out = m };
        Ok(())
    })
}

/// Runs the benchmark configured by flat `key=value` lines, the same
/// format as the CLI config file, writing outputs under its `out` key.
/// Per-model failures still yield a report; see
/// [`hrb_report_failure_count`].
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrb_bench_run(config: *const c_char, out: *mut *mut HrbReport) -> HrbStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = unsafe { str_arg(config, "config") }?;
        let mut cfg = BenchConfig::default();
        cfg.apply(&parse_config_text(text)?)?;
        let outcome = cmd_bench(&cfg)?;
        let to_c = |s: String| CString::new(s).map_err(|_| Fail(HrbStatus::InvalidArgument, "NUL in report".into()));
        let report = HrbReport {
            csv: to_c(outcome.report.to_csv())?,
            table: to_c(render_table(&outcome.report.table_columns()).text)?,
            failures: outcome.failures.len(),
        };
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(report)) };
        Ok(())
    })
}

/// Newly allocated copy of the report CSV; free with [`hrb_string_free`].
/// Null for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hrb_report_csv(report: *const HrbReport) -> *mut c_char {
    // SAFETY: caller guarantees null or a live handle.
    unsafe { report.as_ref() }.map_or(ptr::null_mut(), |r| r.csv.clone().into_raw())
}

/// Newly allocated copy of the text table; free with [`hrb_string_free`].
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hrb_report_table(report: *const HrbReport) -> *mut c_char {
    // SAFETY: caller guarantees null or a live handle.
    unsafe { report.as_ref() }.map_or(ptr::null_mut(), |r| r.table.clone().into_raw())
}

/// Number of (model, series) pairs without a report row.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hrb_report_failure_count(report: *const HrbReport) -> usize {
    // SAFETY: caller guarantees null or a live handle.
    unsafe { report.as_ref() }.map_or(0, |r| r.failures)
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hrb_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string came from CString::into_raw and is freed once.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hrb_report_free(report: *mut HrbReport) {
    if !report.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(report) });
    }
}
