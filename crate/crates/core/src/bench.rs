//! The end-to-end pipeline behind `hrbench bench`: ingest, screen, window,
//! cross-validate, evaluate, then write the report, logs, checkpoints and
//! figures.

use crate::classical::{dominant_periods, prophet_fit, ProphetConfig};
use crate::dataset::{
    load_series, make_folds, outliers_csv, synth_series, zscore_outlier_report, FoldSpec, NormalizationMode,
    SeriesFormat, SynthProfile, TimeSeries, WindowGeometry, DEFAULT_HORIZON, DEFAULT_INTERVAL_SECONDS,
    DEFAULT_LOOKBACK,
};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_forecasts, classical_forecasts, neural_forecasts, render_table, ClassicalOptions, EvalReport, ForecastSet,
    ReportRow,
};
use crate::models::{build_model, save_checkpoint, ModelKind};
use crate::plot::{plot_compare, plot_prophet, plot_series};
use crate::train::{cross_validate, TrainConfig, PAPER_EPOCHS};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Length of a synthetic series when the data spec names none.
pub const DEFAULT_SYNTH_LENGTH: usize = 1800;
/// Training-window subsampling used by the bench unless overridden.
pub const DEFAULT_TRAIN_STRIDE: usize = 4;
/// Models drawn in the comparison figure.
pub const COMPARE_MODELS: usize = 5;

/// Where one series comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { profile: SynthProfile, seed: u64, length: usize },
    File(PathBuf),
}

impl FromStr for DataSource {
    type Err = Error;

    /// `synthetic:<profile>:seed=N[:length=N]` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::Config("file: data source needs a path".into()));
            }
            return Ok(DataSource::File(PathBuf::from(path)));
        }
        let rest = s
            .strip_prefix("synthetic:")
            .ok_or_else(|| Error::Config(format!("data source {s:?} must start with `synthetic:` or `file:`")))?;
        let mut parts = rest.split(':');
        let profile: SynthProfile = parts.next().unwrap_or_default().parse()?;
        let (mut seed, mut length) = (None, DEFAULT_SYNTH_LENGTH);
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in data source, got {part:?}")))?;
            let n: u64 = value
                .parse()
                .map_err(|_| Error::Config(format!("{key} in data source must be an integer, got {value:?}")))?;
            match key {
                "seed" => seed = Some(n),
                "length" => length = n as usize,
                other => {
                    return Err(Error::Config(format!("unknown data source key {other:?}; expected seed or length")))
                }
            }
        }
        let seed = seed.ok_or_else(|| Error::Config(format!("synthetic data source {s:?} needs seed=N")))?;
        Ok(DataSource::Synthetic { profile, seed, length })
    }
}

impl DataSource {
    pub fn load(&self, interval_seconds: f64) -> Result<TimeSeries> {
        match self {
            DataSource::Synthetic { profile, seed, length } => {
                let s = synth_series(*seed, *length, *profile)?;
                TimeSeries::new(s.id().to_string(), s.values().to_vec(), interval_seconds)
            }
            DataSource::File(path) => load_series(path, SeriesFormat::from_path(path), interval_seconds),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub data: Vec<DataSource>,
    pub models: Vec<ModelKind>,
    pub lookback: usize,
    pub horizon: usize,
    /// Spacing between consecutive windows.
    pub stride: usize,
    pub train: TrainConfig,
    pub interval_seconds: f64,
    pub normalization: NormalizationMode,
    pub classical: ClassicalOptions,
    pub out: PathBuf,
    pub outlier_threshold: f64,
    pub plots: bool,
    pub checkpoints: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            data: vec![DataSource::Synthetic {
                profile: SynthProfile::QuasiPeriodic,
                seed: 1,
                length: DEFAULT_SYNTH_LENGTH,
            }],
            models: ModelKind::ALL.to_vec(),
            lookback: DEFAULT_LOOKBACK,
            horizon: DEFAULT_HORIZON,
            stride: 1,
            train: TrainConfig { window_stride: DEFAULT_TRAIN_STRIDE, ..TrainConfig::default() },
            interval_seconds: DEFAULT_INTERVAL_SECONDS,
            normalization: NormalizationMode::PerFold,
            classical: ClassicalOptions::default(),
            out: PathBuf::from("hrbench-out"),
            outlier_threshold: 3.0,
            plots: true,
            checkpoints: true,
        }
    }
}

/// Keys accepted by [`BenchConfig::set`], in config files and as flags.
pub const CONFIG_KEYS: [&str; 19] = [
    "data",
    "models",
    "lookback",
    "horizon",
    "stride",
    "train-stride",
    "epochs",
    "batch-size",
    "lr",
    "folds",
    "seed",
    "interval",
    "out",
    "paper-protocol",
    "paper-normalization",
    "max-period",
    "outlier-threshold",
    "plots",
    "checkpoints",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

impl BenchConfig {
    /// Applies one `key=value` setting. `data` takes a comma-separated list.
    /// `paper-protocol` sets 300 epochs on every training window.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "data" => {
                self.data =
                    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect::<Result<_>>()?;
            }
            "models" => self.models = ModelKind::parse_list(v)?,
            "lookback" => self.lookback = parse(&key, v)?,
            "horizon" => self.horizon = parse(&key, v)?,
            "stride" => self.stride = parse(&key, v)?,
            "train-stride" => self.train.window_stride = parse(&key, v)?,
            "epochs" => self.train.epochs = parse(&key, v)?,
            "batch-size" => self.train.batch_size = parse(&key, v)?,
            "lr" => self.train.lr = parse(&key, v)?,
            "folds" => self.train.folds = parse(&key, v)?,
            "seed" => self.train.seed = parse(&key, v)?,
            "interval" => self.interval_seconds = parse(&key, v)?,
            "out" => self.out = PathBuf::from(v),
            "paper-protocol" => {
                if parse_bool(&key, v)? {
                    self.train.epochs = PAPER_EPOCHS;
                    self.train.window_stride = 1;
                }
            }
            "paper-normalization" => {
                self.normalization =
                    if parse_bool(&key, v)? { NormalizationMode::Global } else { NormalizationMode::PerFold };
            }
            "max-period" => self.classical.max_period = parse(&key, v)?,
            "outlier-threshold" => self.outlier_threshold = parse(&key, v)?,
            "plots" => self.plots = parse_bool(&key, v)?,
            "checkpoints" => self.checkpoints = parse_bool(&key, v)?,
            other => {
                return Err(Error::Config(format!("unknown setting {other:?}; valid keys: {}", CONFIG_KEYS.join(", "))))
            }
        }
        Ok(())
    }

    /// Applies settings in order; `paper-protocol` goes first so explicit
    /// values in the same layer override it.
    pub fn apply(&mut self, settings: &[(String, String)]) -> Result<()> {
        let is_protocol = |k: &str| k.trim().trim_start_matches("--").replace('_', "-") == "paper-protocol";
        for (k, v) in settings.iter().filter(|(k, _)| is_protocol(k)) {
            self.set(k, v)?;
        }
        for (k, v) in settings.iter().filter(|(k, _)| !is_protocol(k)) {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config(format!("no models selected; valid names: {}", ModelKind::valid_names())));
        }
        if self.data.is_empty() {
            return Err(Error::Config("no data sources given".into()));
        }
        if !(self.outlier_threshold > 0.0) {
            return Err(Error::Config("outlier threshold must be positive".into()));
        }
        if !(self.interval_seconds.is_finite() && self.interval_seconds > 0.0) {
            return Err(Error::Config("interval must be a positive number of seconds".into()));
        }
        WindowGeometry::new(self.lookback, self.horizon, self.stride)?;
        self.train.validate()
    }

    fn geometry(&self) -> Result<WindowGeometry> {
        WindowGeometry::new(self.lookback, self.horizon, self.stride)
    }
}

/// Parses flat `key=value` text. Blank lines and lines starting with `#`
/// are skipped; the value is everything after the first `=`.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Ingestion { line: n + 1, message: format!("expected key=value, got {line:?}") })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    parse_config_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// A model that produced no report row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchFailure {
    pub model: ModelKind,
    pub series: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: EvalReport,
    pub failures: Vec<BenchFailure>,
    /// Forecasts per (model, series) that evaluated successfully.
    pub forecasts: Vec<(ModelKind, String, ForecastSet)>,
}

impl BenchOutcome {
    /// 0 when every requested (model, series) pair has a row, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.failures.is_empty())
    }
}

/// File-name-safe form of a series id.
pub fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn fold_scheme(cfg: &BenchConfig) -> String {
    format!(
        "blocked {}-fold CV, L={} H={} window stride {}, training windows every {}, {} normalization",
        cfg.train.folds,
        cfg.lookback,
        cfg.horizon,
        cfg.stride,
        cfg.train.window_stride,
        match cfg.normalization {
            NormalizationMode::PerFold => "per-fold min-max",
            NormalizationMode::Global => "global min-max",
        }
    )
}

/// Runs one model on one series. Neural models also write their training
/// log and per-fold checkpoints.
fn run_model(
    cfg: &BenchConfig,
    kind: ModelKind,
    series: &TimeSeries,
    folds: &[FoldSpec],
    geometry: WindowGeometry,
) -> Result<ForecastSet> {
    let values = series.values();
    match kind {
        ModelKind::Sarima | ModelKind::Prophet => {
            classical_forecasts(kind, values, folds, geometry, cfg.normalization, &cfg.classical)
        }
        ModelKind::Naive | ModelKind::Mean => baseline_forecasts(kind, values, folds, geometry),
        _ => {
            let (l, h) = (cfg.lookback, cfg.horizon);
            let factory = move |seed: u64| build_model(kind, l, h, seed);
            let outcome = cross_validate(&factory, values, folds, geometry, cfg.normalization, &cfg.train)?;
            let stem = format!("{}_{}", kind.id(), file_stem(series.id()));
            write(&cfg.out.join(format!("trainlog_{stem}.csv")), &outcome.log.to_csv())?;
            if cfg.checkpoints {
                let dir = cfg.out.join("checkpoints");
                for snap in &outcome.snapshots {
                    save_checkpoint(snap.model.as_ref(), &dir.join(format!("{stem}_fold{}.ckpt", snap.fold_index)))?;
                }
            }
            if let Some((fold, err)) = outcome.failures.first() {
                return Err(Error::Evaluation(format!("fold {fold} failed to train: {err}")));
            }
            neural_forecasts(&outcome.snapshots, values, folds, geometry)
        }
    }
}

/// Target range of the last fold covered by every strided forecast.
fn compare_range(fold: &FoldSpec, geometry: WindowGeometry) -> std::ops::Range<usize> {
    let start = geometry.target_span(fold.val_indices.start).start;
    let origins = fold.val_indices.len().div_ceil(geometry.horizon);
    start..start + origins * geometry.horizon
}

/// Predictions covering `range` by back-to-back horizon blocks.
fn strided_path(set: &ForecastSet, range: &std::ops::Range<usize>) -> Option<Vec<f64>> {
    let h = set.horizon;
    let mut out = Vec::with_capacity(range.len());
    let mut next = range.start;
    for (k, &s) in set.starts.iter().enumerate() {
        if s == next && next < range.end {
            out.extend_from_slice(&set.predictions[k * h..(k + 1) * h]);
            next += h;
        }
    }
    (out.len() == range.len()).then_some(out)
}

fn write_series_plots(
    cfg: &BenchConfig,
    series: &TimeSeries,
    results: &[(ModelKind, f64, &ForecastSet)],
    folds: &[FoldSpec],
    geometry: WindowGeometry,
) -> Result<()> {
    let dir = cfg.out.join("plots");
    let stem = file_stem(series.id());
    let values = series.values();
    write(&dir.join(format!("series_{stem}.svg")), &plot_series(values, cfg.interval_seconds, series.id())?)?;

    let mut pcfg = ProphetConfig::default();
    let max_p = cfg.classical.max_period.min(values.len() / 2);
    if max_p >= 2 {
        pcfg.seasonal_periods = dominant_periods(values, max_p, cfg.classical.prophet_seasonalities)?;
    }
    match prophet_fit(values, &pcfg) {
        Ok(fit) => write(
            &dir.join(format!("prophet_{stem}.svg")),
            &plot_prophet(&fit, values, cfg.interval_seconds, &format!("{} Prophet fit", series.id()))?,
        )?,
        Err(e) => log::warn!("skipping Prophet figure for {}: {e}", series.id()),
    }

    let Some(last) = folds.last() else { return Ok(()) };
    let range = compare_range(last, geometry);
    if range.end > values.len() {
        return Ok(());
    }
    let mut ranked: Vec<&(ModelKind, f64, &ForecastSet)> =
        results.iter().filter(|(k, _, _)| !matches!(k, ModelKind::Naive | ModelKind::Mean)).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let preds: Vec<(String, Vec<f64>)> = ranked
        .iter()
        .filter_map(|(k, _, set)| strided_path(set, &range).map(|p| (k.label().to_string(), p)))
        .take(COMPARE_MODELS)
        .collect();
    if !preds.is_empty() {
        let svg = plot_compare(
            &values[range.clone()],
            &preds,
            range.start,
            cfg.interval_seconds,
            &format!("{} true vs predicted, last fold", series.id()),
        )?;
        write(&dir.join(format!("compare_{stem}.svg")), &svg)?;
    }
    Ok(())
}

fn render_report_text(cfg: &BenchConfig, outcome: &BenchOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "hrbench report");
    let _ = writeln!(
        s,
        "seed {}, {} epochs, batch {}, lr {}",
        cfg.train.seed, cfg.train.epochs, cfg.train.batch_size, cfg.train.lr
    );
    let _ = writeln!(s, "{}", outcome.report.fold_scheme);
    let _ = writeln!(s, "metrics: cross-validation validation windows, bpm scale, MAPE as a fraction");
    let _ = writeln!(s);
    let _ = write!(s, "{}", render_table(&outcome.report.table_columns()).text);
    let _ = writeln!(s);
    for m in outcome.report.models() {
        if let Some(d) = outcome.report.config_digests.get(m.id()) {
            let _ = writeln!(s, "{} config {}", m.label(), d);
        }
    }
    if !outcome.failures.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "failures:");
        for f in &outcome.failures {
            let _ = writeln!(s, "  {} on {}: {}", f.model.label(), f.series, f.message);
        }
    }
    s
}

/// Runs the full pipeline and writes every output under `cfg.out`.
/// Per-model failures are collected, not fatal; configuration and output
/// errors are.
pub fn cmd_bench(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let geometry = cfg.geometry()?;
    mkdir(&cfg.out)?;
    if cfg.plots {
        mkdir(&cfg.out.join("plots"))?;
    }
    if cfg.checkpoints {
        mkdir(&cfg.out.join("checkpoints"))?;
    }
    let mut report = EvalReport { seed: cfg.train.seed, fold_scheme: fold_scheme(cfg), ..EvalReport::default() };
    for &kind in cfg.models.iter().filter(|k| k.is_neural()) {
        let model = build_model(kind, cfg.lookback, cfg.horizon, cfg.train.seed)?;
        report.config_digests.insert(kind.id().to_string(), model.config_digest());
    }
    let mut failures = Vec::new();
    let mut forecasts = Vec::new();
    for source in &cfg.data {
        let series = source.load(cfg.interval_seconds)?;
        let stem = file_stem(series.id());
        let outliers = zscore_outlier_report(series.values(), cfg.outlier_threshold)?;
        write(&cfg.out.join(format!("outliers_{stem}.csv")), &outliers_csv(&outliers))?;
        let folds = geometry.count(series.len()).and_then(|n| make_folds(n, cfg.train.folds, geometry));
        let folds = match folds {
            Ok(f) => f,
            Err(e) => {
                for &model in &cfg.models {
                    failures.push(BenchFailure { model, series: series.id().to_string(), message: e.to_string() });
                }
                continue;
            }
        };
        let mut results = Vec::new();
        for &kind in &cfg.models {
            log::info!("{kind} on {}", series.id());
            match run_model(cfg, kind, &series, &folds, geometry).and_then(|set| set.metrics().map(|m| (set, m))) {
                Ok((set, metrics)) => {
                    report.rows.push(ReportRow { model: kind, series: series.id().to_string(), metrics });
                    results.push((kind, metrics.mae, set));
                }
                Err(e) => {
                    log::error!("{kind} on {} failed: {e}", series.id());
                    failures.push(BenchFailure {
                        model: kind,
                        series: series.id().to_string(),
                        message: e.to_string(),
                    });
                }
            }
        }
        if cfg.plots {
            let view: Vec<(ModelKind, f64, &ForecastSet)> = results.iter().map(|(k, m, s)| (*k, *m, s)).collect();
            if let Err(e) = write_series_plots(cfg, &series, &view, &folds, geometry) {
                log::warn!("figures for {} incomplete: {e}", series.id());
            }
        }
        forecasts.extend(results.into_iter().map(|(k, _, s)| (k, series.id().to_string(), s)));
    }
    let outcome = BenchOutcome { report, failures, forecasts };
    write(&cfg.out.join("report.csv"), &outcome.report.to_csv())?;
    write(&cfg.out.join("table.csv"), &render_table(&outcome.report.table_columns()).csv)?;
    write(&cfg.out.join("report.txt"), &render_report_text(cfg, &outcome))?;
    Ok(outcome)
}
