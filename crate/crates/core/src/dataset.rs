//! Series ingestion, outlier screening, min-max scaling, supervised
//! windowing and blocked cross-validation folds.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

pub const DEFAULT_INTERVAL_SECONDS: f64 = 0.5;
pub const DEFAULT_LOOKBACK: usize = 64;
pub const DEFAULT_HORIZON: usize = 16;
pub const DEFAULT_FOLDS: usize = 5;

/// A univariate heart-rate recording sampled at a fixed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    values: Vec<f64>,
    interval_seconds: f64,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>, interval_seconds: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("series has no readings".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Input(format!(
                "reading {i} is {} but heart rate must be finite and positive",
                values[i]
            )));
        }
        if !(interval_seconds.is_finite() && interval_seconds > 0.0) {
            return Err(Error::Input(format!("sampling interval must be positive, got {interval_seconds}")));
        }
        Ok(Self { id: id.into(), values, interval_seconds })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interval_seconds(&self) -> f64 {
        self.interval_seconds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesFormat {
    /// One ASCII decimal reading per line.
    Plain,
    /// Header row with a required `bpm` column; `t` is accepted and ignored.
    Csv,
}

impl SeriesFormat {
    /// `.csv` files are CSV, everything else is plain.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => SeriesFormat::Csv,
            _ => SeriesFormat::Plain,
        }
    }
}

pub fn load_series(path: &Path, format: SeriesFormat, interval_seconds: f64) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series").to_string();
    parse_series(&text, format, id, interval_seconds)
}

/// Parses series text. Line numbers in errors are 1-based and count every
/// physical line, header included.
pub fn parse_series(
    text: &str,
    format: SeriesFormat,
    id: impl Into<String>,
    interval_seconds: f64,
) -> Result<TimeSeries> {
    let mut values = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let bpm_col = match format {
        SeriesFormat::Plain => None,
        SeriesFormat::Csv => {
            let (line, header) = lines
                .by_ref()
                .find(|(_, l)| !l.is_empty())
                .ok_or(Error::Ingestion { line: 1, message: "missing CSV header".into() })?;
            let col = header.split(',').position(|h| h.trim().eq_ignore_ascii_case("bpm")).ok_or_else(|| {
                Error::Ingestion { line, message: format!("CSV header {header:?} has no bpm column") }
            })?;
            Some(col)
        }
    };
    for (line, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let field = match bpm_col {
            None => raw,
            Some(c) => raw
                .split(',')
                .nth(c)
                .map(str::trim)
                .ok_or_else(|| Error::Ingestion { line, message: format!("row {raw:?} has no bpm field") })?,
        };
        let v: f64 =
            field.parse().map_err(|_| Error::Ingestion { line, message: format!("{field:?} is not a number") })?;
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Ingestion { line, message: format!("reading {v} is not a positive heart rate") });
        }
        values.push(v);
    }
    if values.len() < 2 {
        return Err(Error::Ingestion {
            line: text.lines().count().max(1),
            message: format!("need at least 2 readings, found {}", values.len()),
        });
    }
    TimeSeries::new(id, values, interval_seconds)
}

// ---- outliers ------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub index: usize,
    pub value: f64,
    pub zscore: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Indices whose |z-score| exceeds `threshold`. Nothing is removed.
pub fn zscore_outlier_report(values: &[f64], threshold: f64) -> Result<Vec<Outlier>> {
    if values.len() < 2 {
        return Err(Error::InsufficientData { what: "readings for z-scores", required: 2, available: values.len() });
    }
    let (mean, std) = mean_std(values);
    if std == 0.0 || !std.is_finite() {
        return Err(Error::DegenerateStatistics("zero standard deviation; z-scores undefined".into()));
    }
    Ok(values
        .iter()
        .enumerate()
        .filter_map(|(index, &value)| {
            let zscore = (value - mean) / std;
            (zscore.abs() > threshold).then_some(Outlier { index, value, zscore })
        })
        .collect())
}

pub fn outliers_csv(report: &[Outlier]) -> String {
    let mut s = String::from("index,value,zscore\n");
    for o in report {
        s.push_str(&format!("{},{},{:.6}\n", o.index, o.value, o.zscore));
    }
    s
}

// ---- normalization -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: f64,
    pub max: f64,
}

pub fn fit_minmax(values: &[f64]) -> Result<NormalizationParams> {
    if values.is_empty() {
        return Err(Error::Input("cannot fit min-max on no values".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::DegenerateRange(min));
    }
    Ok(NormalizationParams { min, max })
}

impl NormalizationParams {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / self.range()
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.range() + self.min
    }
}

/// Where min-max statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizationMode {
    /// Fit on the fold's training windows only.
    #[default]
    PerFold,
    /// Fit on the whole series, validation span included.
    Global,
}

/// Min-max statistics for one fold under `mode`.
pub fn fit_fold_normalization(
    values: &[f64],
    fold: &FoldSpec,
    geometry: &WindowGeometry,
    mode: NormalizationMode,
) -> Result<NormalizationParams> {
    match mode {
        NormalizationMode::Global => fit_minmax(values),
        NormalizationMode::PerFold => {
            let train: Vec<f64> =
                fold.train_segments(geometry).into_iter().flat_map(|r| values[r].iter().copied()).collect();
            if train.is_empty() {
                return Err(Error::InsufficientData { what: "training windows in a fold", required: 1, available: 0 });
            }
            fit_minmax(&train)
        }
    }
}

pub fn apply_minmax(values: &[f64], p: &NormalizationParams) -> Vec<f64> {
    values.iter().map(|&v| p.apply(v)).collect()
}

pub fn invert_minmax(values: &[f64], p: &NormalizationParams) -> Vec<f64> {
    values.iter().map(|&v| p.invert(v)).collect()
}

// ---- windows -------------------------------------------------------------

/// Lookback/horizon/stride triple shared by windows and folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGeometry {
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
}

impl WindowGeometry {
    pub fn new(lookback: usize, horizon: usize, stride: usize) -> Result<Self> {
        if lookback == 0 || horizon == 0 || stride == 0 {
            return Err(Error::Config(format!(
                "lookback, horizon and stride must be ≥ 1 (got {lookback}, {horizon}, {stride})"
            )));
        }
        Ok(Self { lookback, horizon, stride })
    }

    pub fn span(&self) -> usize {
        self.lookback + self.horizon
    }

    /// Source indices covered by window `i`.
    pub fn window_span(&self, i: usize) -> Range<usize> {
        let s = i * self.stride;
        s..s + self.span()
    }

    /// Source indices of window `i`'s forecast target.
    pub fn target_span(&self, i: usize) -> Range<usize> {
        let s = i * self.stride + self.lookback;
        s..s + self.horizon
    }

    pub fn count(&self, series_len: usize) -> Result<usize> {
        if series_len < self.span() {
            return Err(Error::InsufficientData {
                what: "readings for one lookback+horizon window",
                required: self.span(),
                available: series_len,
            });
        }
        Ok((series_len - self.span()) / self.stride + 1)
    }
}

/// Supervised (lookback → horizon) pairs cut from one series.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    geometry: WindowGeometry,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl WindowedDataset {
    pub fn geometry(&self) -> WindowGeometry {
        self.geometry
    }

    pub fn lookback(&self) -> usize {
        self.geometry.lookback
    }

    pub fn horizon(&self) -> usize {
        self.geometry.horizon
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.geometry.lookback
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let l = self.geometry.lookback;
        &self.inputs[i * l..(i + 1) * l]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        let h = self.geometry.horizon;
        &self.targets[i * h..(i + 1) * h]
    }

    /// Inputs of the listed windows stacked row-major, `[idx.len(), L]`.
    pub fn gather_inputs(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().flat_map(|&i| self.input(i).iter().copied()).collect()
    }

    pub fn gather_targets(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().flat_map(|&i| self.target(i).iter().copied()).collect()
    }
}

/// Cuts `values` into windows; pair `i` covers `[i·stride, i·stride + L + H)`.
pub fn make_windows(values: &[f64], geometry: WindowGeometry) -> Result<WindowedDataset> {
    let n = geometry.count(values.len())?;
    let (l, h) = (geometry.lookback, geometry.horizon);
    let mut inputs = Vec::with_capacity(n * l);
    let mut targets = Vec::with_capacity(n * h);
    for i in 0..n {
        let span = geometry.window_span(i);
        inputs.extend_from_slice(&values[span.start..span.start + l]);
        targets.extend_from_slice(&values[span.start + l..span.end]);
    }
    Ok(WindowedDataset { geometry, inputs, targets })
}

// ---- folds ---------------------------------------------------------------

/// One blocked cross-validation split over window indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_index: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Range<usize>,
}

impl FoldSpec {
    /// Source-series range touched by any validation window.
    pub fn val_time_span(&self, g: &WindowGeometry) -> Range<usize> {
        g.window_span(self.val_indices.start).start..g.window_span(self.val_indices.end - 1).end
    }

    /// Maximal contiguous source ranges covered by training windows.
    pub fn train_segments(&self, g: &WindowGeometry) -> Vec<Range<usize>> {
        let mut segs: Vec<Range<usize>> = Vec::new();
        for &i in &self.train_indices {
            let s = g.window_span(i);
            match segs.last_mut() {
                Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
                _ => segs.push(s),
            }
        }
        segs
    }
}

/// Contiguous, temporally ordered validation blocks; the first
/// `n_windows mod k` blocks take one extra window. Training windows are all
/// windows whose source span misses the validation block's span.
pub fn make_folds(n_windows: usize, k: usize, geometry: WindowGeometry) -> Result<Vec<FoldSpec>> {
    if k == 0 {
        return Err(Error::Config("fold count must be ≥ 1".into()));
    }
    if n_windows < k {
        return Err(Error::InsufficientData {
            what: "windows for the requested folds",
            required: k,
            available: n_windows,
        });
    }
    let (base, rem) = (n_windows / k, n_windows % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_index in 0..k {
        let size = base + usize::from(fold_index < rem);
        let val = start..start + size;
        start += size;
        let mut spec = FoldSpec { fold_index, train_indices: Vec::new(), val_indices: val };
        let vspan = spec.val_time_span(&geometry);
        spec.train_indices = (0..n_windows)
            .filter(|&i| {
                let s = geometry.window_span(i);
                s.end <= vspan.start || s.start >= vspan.end
            })
            .collect();
        folds.push(spec);
    }
    Ok(folds)
}

// ---- synthetic series ----------------------------------------------------

/// Generators standing in for real recordings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SynthProfile {
    /// 80 bpm + 6·sin(2πt/30) + 2·sin(2πt/7) + N(0, 1).
    QuasiPeriodic,
    /// Piecewise-linear trend (slope +0.01 then −0.02 bpm/sample after
    /// `changepoint`) + 2·sin(2πt/50) + N(0, 0.5²), starting at 75 bpm.
    TrendShift { changepoint: Option<usize> },
    /// 80 bpm + stationary AR(1) with coefficient `phi` and unit innovations.
    Ar1 { phi: f64 },
}

impl SynthProfile {
    pub const NAMES: [&'static str; 3] = ["quasi_periodic", "trend_shift", "ar1"];

    pub fn name(&self) -> &'static str {
        match self {
            SynthProfile::QuasiPeriodic => "quasi_periodic",
            SynthProfile::TrendShift { .. } => "trend_shift",
            SynthProfile::Ar1 { .. } => "ar1",
        }
    }

    /// Changepoint actually used for a series of `length` samples.
    pub fn trend_changepoint(length: usize, explicit: Option<usize>) -> usize {
        explicit.unwrap_or_else(|| 500.min(2 * length / 5))
    }
}

impl FromStr for SynthProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quasi_periodic" => Ok(SynthProfile::QuasiPeriodic),
            "trend_shift" => Ok(SynthProfile::TrendShift { changepoint: None }),
            "ar1" => Ok(SynthProfile::Ar1 { phi: 0.7 }),
            other => Err(Error::Config(format!(
                "unknown synthetic profile {other:?}; expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// Deterministic synthetic series; the same seed gives bit-identical output.
pub fn synth_series(seed: u64, length: usize, profile: SynthProfile) -> Result<TimeSeries> {
    if length < 2 {
        return Err(Error::InsufficientData { what: "synthetic samples", required: 2, available: length });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = match profile {
        SynthProfile::QuasiPeriodic => {
            let noise = Normal::new(0.0, 1.0).unwrap();
            (0..length)
                .map(|t| {
                    let t = t as f64;
                    80.0 + 6.0 * (2.0 * PI * t / 30.0).sin() + 2.0 * (2.0 * PI * t / 7.0).sin() + noise.sample(&mut rng)
                })
                .collect()
        }
        SynthProfile::TrendShift { changepoint } => {
            let cp = SynthProfile::trend_changepoint(length, changepoint) as f64;
            let noise = Normal::new(0.0, 0.5).unwrap();
            (0..length)
                .map(|t| {
                    let t = t as f64;
                    let trend = 75.0 + 0.01 * t - 0.03 * (t - cp).max(0.0);
                    trend + 2.0 * (2.0 * PI * t / 50.0).sin() + noise.sample(&mut rng)
                })
                .collect()
        }
        SynthProfile::Ar1 { phi } => {
            if !(phi.abs() < 1.0) {
                return Err(Error::Config(format!("ar1 coefficient must satisfy |phi| < 1, got {phi}")));
            }
            let eps = Normal::new(0.0, 1.0).unwrap();
            let stationary_sd = (1.0 / (1.0 - phi * phi)).sqrt();
            let mut x = eps.sample(&mut rng) * stationary_sd;
            let mut out = Vec::with_capacity(length);
            for _ in 0..length {
                out.push(80.0 + x);
                x = phi * x + eps.sample(&mut rng);
            }
            out
        }
    };
    let id = format!("synthetic_{}_{seed}", profile.name());
    TimeSeries::new(id, values, DEFAULT_INTERVAL_SECONDS)
}

/// Sample autocorrelation at `lag` (biased estimator, population variance).
pub fn autocorrelation(values: &[f64], lag: usize) -> f64 {
    let n = values.len();
    if lag >= n {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (lag..n).map(|t| (values[t] - mean) * (values[t - lag] - mean)).sum();
    num / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rfft_magnitudes;
    use proptest::prelude::*;

    #[test]
    fn plain_file_reads_in_order() {
        let s = parse_series("50\n60\n70", SeriesFormat::Plain, "x", 0.5).unwrap();
        assert_eq!(s.values(), &[50.0, 60.0, 70.0]);
    }

    #[test]
    fn csv_reads_bpm_column() {
        let s = parse_series("t,bpm\n0,80\n0.5,82\n", SeriesFormat::Csv, "x", 0.5).unwrap();
        assert_eq!(s.values(), &[80.0, 82.0]);
        assert_eq!(s.interval_seconds(), 0.5);
    }

    #[test]
    fn non_numeric_row_names_its_line() {
        let err = parse_series("abc\n60\n", SeriesFormat::Plain, "x", 0.5).unwrap_err();
        assert!(matches!(err, Error::Ingestion { line: 1, .. }), "{err}");
        let err = parse_series("bpm\n60\nxx\n", SeriesFormat::Csv, "x", 0.5).unwrap_err();
        assert!(matches!(err, Error::Ingestion { line: 3, .. }), "{err}");
    }

    #[test]
    fn csv_without_bpm_column_is_rejected() {
        assert!(parse_series("t,hr\n0,1\n1,2\n", SeriesFormat::Csv, "x", 0.5).is_err());
    }

    #[test]
    fn empty_and_single_reading_are_rejected() {
        assert!(matches!(parse_series("", SeriesFormat::Plain, "x", 0.5), Err(Error::Ingestion { .. })));
        assert!(parse_series("72\n", SeriesFormat::Plain, "x", 0.5).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_series(Path::new("/nonexistent/hr.txt"), SeriesFormat::Plain, 0.5).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn constant_series_has_degenerate_zscores() {
        assert!(matches!(zscore_outlier_report(&[5.0; 5], 3.0), Err(Error::DegenerateStatistics(_))));
    }

    #[test]
    fn zscore_exactly_at_threshold_is_not_flagged() {
        let mut v = vec![0.0; 9];
        v.push(10.0);
        // Population mean 1, std 3: the spike has z = 3 exactly.
        assert!(zscore_outlier_report(&v, 3.0).unwrap().is_empty());
        let r = zscore_outlier_report(&v, 2.9).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].index, 9);
        assert_eq!(r[0].zscore, 3.0);
    }

    #[test]
    fn injected_spike_is_the_only_outlier() {
        let base = synth_series(3, 500, SynthProfile::Ar1 { phi: 0.0 }).unwrap();
        let mut v = base.values().to_vec();
        let (mean, std) = mean_std(&v);
        // Shift the spike so that after it is placed it sits at mean + 5·std
        // of the final series: solve on the modified series iteratively.
        let mut spike = mean + 5.0 * std;
        for _ in 0..50 {
            v[123] = spike;
            let (m, s) = mean_std(&v);
            spike = m + 5.0 * s;
        }
        v[123] = spike;
        let r = zscore_outlier_report(&v, 3.0).unwrap();
        assert!(r.iter().any(|o| o.index == 123));
        assert!(r.iter().filter(|o| o.index != 123).all(|o| o.zscore.abs() <= 4.0));
    }

    #[test]
    fn minmax_examples() {
        let p = fit_minmax(&[50.0, 75.0, 100.0]).unwrap();
        assert_eq!(apply_minmax(&[50.0, 75.0, 100.0], &p), vec![0.0, 0.5, 1.0]);
        let p = NormalizationParams { min: 50.0, max: 100.0 };
        assert!((p.apply(60.0) - 0.2).abs() < 1e-15);
        assert!(matches!(fit_minmax(&[4.0, 4.0]), Err(Error::DegenerateRange(_))));
    }

    #[test]
    fn window_counts() {
        let g = WindowGeometry::new(4, 2, 1).unwrap();
        assert_eq!(make_windows(&[1.0; 10], g).unwrap().len(), 5);
        let g = WindowGeometry::new(64, 16, 1).unwrap();
        assert_eq!(make_windows(&vec![1.0; 1800], g).unwrap().len(), 1721);
        let g = WindowGeometry::new(4, 2, 1).unwrap();
        let err = make_windows(&[1.0; 5], g).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { required: 6, available: 5, .. }));
    }

    #[test]
    fn windows_are_contiguous_pairs() {
        let v: Vec<f64> = (0..20).map(f64::from).collect();
        let w = make_windows(&v, WindowGeometry::new(5, 3, 2).unwrap()).unwrap();
        assert_eq!(w.input(2), &[4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(w.target(2), &[9.0, 10.0, 11.0]);
    }

    #[test]
    fn fold_blocks_partition_windows() {
        let g = WindowGeometry::new(1, 1, 1).unwrap();
        let f = make_folds(10, 5, g).unwrap();
        assert!(f.iter().all(|s| s.val_indices.len() == 2));
        let f = make_folds(11, 5, g).unwrap();
        let sizes: Vec<usize> = f.iter().map(|s| s.val_indices.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert!(matches!(make_folds(4, 5, g), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn unknown_profile_is_config_error() {
        assert!(matches!("sawtooth".parse::<SynthProfile>(), Err(Error::Config(_))));
    }

    #[test]
    fn synthetic_is_deterministic() {
        for p in ["quasi_periodic", "trend_shift", "ar1"] {
            let p: SynthProfile = p.parse().unwrap();
            let a = synth_series(42, 300, p).unwrap();
            let b = synth_series(42, 300, p).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn white_ar1_has_small_lag1_autocorrelation() {
        let s = synth_series(2024, 2000, SynthProfile::Ar1 { phi: 0.0 }).unwrap();
        assert!(autocorrelation(s.values(), 1).abs() < 0.1);
    }

    #[test]
    fn quasi_periodic_dominant_period_is_30() {
        let s = synth_series(1, 512, SynthProfile::QuasiPeriodic).unwrap();
        let m = rfft_magnitudes(s.values()).unwrap();
        let k = (1..m.len()).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
        let period = 512.0 / k as f64;
        assert!((period - 30.0).abs() < 1.5, "period {period}");
    }

    proptest! {
        #[test]
        fn minmax_round_trip(v in prop::collection::vec(-1e4f64..1e4, 2..50)) {
            prop_assume!(v.iter().any(|x| *x != v[0]));
            let p = fit_minmax(&v).unwrap();
            let back = invert_minmax(&apply_minmax(&v, &p), &p);
            for (a, b) in v.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            prop_assert!(apply_minmax(&v, &p).iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn folds_partition_and_never_leak(n in 5usize..400, l in 1usize..20, h in 1usize..8, stride in 1usize..4) {
            let g = WindowGeometry::new(l, h, stride).unwrap();
            let folds = make_folds(n, 5, g).unwrap();
            let mut covered = vec![0u8; n];
            for f in &folds {
                for i in f.val_indices.clone() { covered[i] += 1; }
                let vs = f.val_time_span(&g);
                for &t in &f.train_indices {
                    let s = g.window_span(t);
                    prop_assert!(s.end <= vs.start || s.start >= vs.end);
                    prop_assert!(!f.val_indices.contains(&t));
                }
            }
            prop_assert!(covered.iter().all(|&c| c == 1));
        }

        #[test]
        fn stride_h_targets_rebuild_the_tail(len in 10usize..200, l in 1usize..8, h in 1usize..6) {
            prop_assume!(len >= l + h);
            let v: Vec<f64> = (0..len).map(|i| i as f64 * 0.5 + 1.0).collect();
            let g = WindowGeometry::new(l, h, h).unwrap();
            let w = make_windows(&v, g).unwrap();
            let joined: Vec<f64> = (0..w.len()).flat_map(|i| w.target(i).to_vec()).collect();
            prop_assert_eq!(&joined[..], &v[l..l + joined.len()]);
        }

        #[test]
        fn outliers_are_affine_invariant(seed in 0u64..50, a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let s = synth_series(seed, 200, SynthProfile::QuasiPeriodic).unwrap();
            let v = s.values();
            let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let r1: Vec<usize> = zscore_outlier_report(v, 2.0).unwrap().iter().map(|o| o.index).collect();
            let r2: Vec<usize> = zscore_outlier_report(&w, 2.0).unwrap().iter().map(|o| o.index).collect();
            prop_assert_eq!(r1, r2);
        }
    }
}
