use hrbench_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hrb_last_error_message()) }.to_string_lossy().into_owned()
}

fn synth(profile: &str, seed: u64, length: usize) -> *mut HrbSeries {
    let name = CString::new(profile).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hrb_series_synth(name.as_ptr(), seed, length, &mut s) }, HrbStatus::Ok, "{}", last_error());
    s
}

#[test]
fn synthetic_series_round_trips_values() {
    let s = synth("quasi_periodic", 3, 200);
    assert_eq!(unsafe { hrb_series_len(s) }, 200);
    let mut buf = vec![0.0; 200];
    let mut written = 0;
    assert_eq!(unsafe { hrb_series_values(s, buf.as_mut_ptr(), buf.len(), &mut written) }, HrbStatus::Ok);
    assert_eq!(written, 200);
    let direct = hrbench_core::dataset::synth_series(3, 200, "quasi_periodic".parse().unwrap()).unwrap();
    assert_eq!(buf, direct.values());
    unsafe { hrb_series_free(s) };
}

#[test]
fn short_buffer_reports_required_length() {
    let s = synth("ar1", 1, 50);
    let mut buf = vec![0.0; 10];
    let mut written = 0;
    let st = unsafe { hrb_series_values(s, buf.as_mut_ptr(), buf.len(), &mut written) };
    assert_eq!(st, HrbStatus::BufferTooSmall);
    assert_eq!(written, 50);
    assert!(last_error().contains("50"));
    unsafe { hrb_series_free(s) };
}

#[test]
fn unknown_profile_is_a_config_error() {
    let name = CString::new("sawtooth").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hrb_series_synth(name.as_ptr(), 1, 100, &mut s) }, HrbStatus::Config);
    assert!(s.is_null());
    assert!(last_error().contains("quasi_periodic"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hrb_series_synth(ptr::null(), 1, 100, &mut s) }, HrbStatus::NullPointer);
    assert_eq!(unsafe { hrb_series_len(ptr::null()) }, 0);
    let mut m = HrbMetrics::default();
    assert_eq!(unsafe { hrb_metrics(ptr::null(), ptr::null(), 0, &mut m) }, HrbStatus::NullPointer);
    unsafe {
        hrb_series_free(ptr::null_mut());
        hrb_report_free(ptr::null_mut());
        hrb_string_free(ptr::null_mut());
    }
    assert!(unsafe { hrb_report_csv(ptr::null()) }.is_null());
}

#[test]
fn metrics_match_hand_values() {
    let y = [100.0, 200.0];
    let yhat = [110.0, 180.0];
    let mut m = HrbMetrics::default();
    assert_eq!(unsafe { hrb_metrics(y.as_ptr(), yhat.as_ptr(), 2, &mut m) }, HrbStatus::Ok);
    assert!((m.mae - 15.0).abs() < 1e-12);
    assert!((m.mape - 0.1).abs() < 1e-12);
    assert!((m.rmse - 250f64.sqrt()).abs() < 1e-12);
    assert_eq!(last_error(), "");
}

#[test]
fn zero_truth_is_a_numeric_error() {
    let y = [0.0, 1.0];
    let mut m = HrbMetrics::default();
    assert_eq!(unsafe { hrb_metrics(y.as_ptr(), y.as_ptr(), 2, &mut m) }, HrbStatus::Numeric);
    let empty: [f64; 0] = [];
    assert_eq!(unsafe { hrb_metrics(empty.as_ptr(), empty.as_ptr(), 0, &mut m) }, HrbStatus::InvalidArgument);
}

#[test]
fn load_reads_plain_files_and_reports_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("t1.txt");
    std::fs::write(&good, "80\n81.5\n79\n").unwrap();
    let path = CString::new(good.to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hrb_series_load(path.as_ptr(), 0.5, &mut s) }, HrbStatus::Ok);
    assert_eq!(unsafe { hrb_series_len(s) }, 3);
    unsafe { hrb_series_free(s) };

    let bad = dir.path().join("t2.txt");
    std::fs::write(&bad, "80\nabc\n").unwrap();
    let path = CString::new(bad.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hrb_series_load(path.as_ptr(), 0.5, &mut s) }, HrbStatus::Ingestion);
    assert!(last_error().contains("line 2"));
}

#[test]
fn bench_run_returns_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "data=synthetic:ar1:seed=7:length=400\nmodels=sarima,naive\nplots=false\nout={}\n",
        dir.path().display()
    );
    let cfg = CString::new(cfg).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { hrb_bench_run(cfg.as_ptr(), &mut r) }, HrbStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { hrb_report_failure_count(r) }, 0);
    let csv = unsafe { hrb_report_csv(r) };
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_string();
    assert!(text.starts_with("model,series,mae,mape,rmse\n"));
    assert!(text.contains("SARIMA,synthetic_ar1_7,"));
    assert!(text.contains("Naive,AVG,"));
    assert_eq!(std::fs::read_to_string(dir.path().join("report.csv")).unwrap(), text);
    let table = unsafe { hrb_report_table(r) };
    assert!(unsafe { CStr::from_ptr(table) }.to_str().unwrap().contains("Avg MAE"));
    unsafe {
        hrb_string_free(csv);
        hrb_string_free(table);
        hrb_report_free(r);
    }
}

#[test]
fn bench_run_rejects_unknown_keys() {
    let cfg = CString::new("colour=blue\n").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { hrb_bench_run(cfg.as_ptr(), &mut r) }, HrbStatus::Config);
    assert!(r.is_null());
    assert!(last_error().contains("valid keys"));
}

#[test]
fn errors_are_per_thread() {
    let mut m = HrbMetrics::default();
    let y = [0.0];
    assert_eq!(unsafe { hrb_metrics(y.as_ptr(), y.as_ptr(), 1, &mut m) }, HrbStatus::Numeric);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}
