use clap::{Args, Parser, Subcommand};
use hrbench_core::bench::{cmd_bench, load_config_file, BenchConfig, DataSource, DEFAULT_SYNTH_LENGTH};
use hrbench_core::classical::{dominant_periods, prophet_fit, ProphetConfig};
use hrbench_core::dataset::{outliers_csv, zscore_outlier_report, DEFAULT_INTERVAL_SECONDS};
use hrbench_core::eval::render_table;
use hrbench_core::plot::{plot_compare, plot_prophet, plot_series};
use hrbench_core::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hrbench", version, about = "Heart-rate forecasting benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Cross-validate and evaluate models, writing reports under --out.
    Bench(BenchArgs),
    /// Plot a series as SVG.
    PlotSeries(SeriesArgs),
    /// Fit Prophet to a series and plot fit, trend and changepoints as SVG.
    PlotProphet(ProphetArgs),
    /// Plot true values against model predictions from a CSV with a `true`
    /// column and one column per model.
    PlotCompare(CompareArgs),
    /// Write the z-score outlier report of a series as CSV.
    Outliers(OutlierArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// key=value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `synthetic:<profile>:seed=N[:length=N]` or `file:<path>`; repeatable.
    #[arg(long)]
    data: Vec<String>,
    /// Comma-separated model ids or `all`.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    lookback: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Spacing between consecutive windows.
    #[arg(long)]
    stride: Option<usize>,
    /// Train on every n-th window (validation always uses all).
    #[arg(long)]
    train_stride: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds between readings.
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// 300 epochs on every training window.
    #[arg(long)]
    paper_protocol: bool,
    /// Min-max fitted on the whole series instead of each fold's training span.
    #[arg(long)]
    paper_normalization: bool,
    #[arg(long)]
    max_period: Option<usize>,
    #[arg(long)]
    no_plots: bool,
    #[arg(long)]
    no_checkpoints: bool,
}

impl BenchArgs {
    fn settings(&self) -> Vec<(String, String)> {
        let mut s: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.push((k.to_string(), v));
            }
        };
        put("data", (!self.data.is_empty()).then(|| self.data.join(",")));
        put("models", self.models.clone());
        put("lookback", self.lookback.map(|v| v.to_string()));
        put("horizon", self.horizon.map(|v| v.to_string()));
        put("stride", self.stride.map(|v| v.to_string()));
        put("train-stride", self.train_stride.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("batch-size", self.batch_size.map(|v| v.to_string()));
        put("lr", self.lr.map(|v| v.to_string()));
        put("folds", self.folds.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("interval", self.interval.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("paper-protocol", self.paper_protocol.then(|| "true".into()));
        put("paper-normalization", self.paper_normalization.then(|| "true".into()));
        put("max-period", self.max_period.map(|v| v.to_string()));
        put("plots", self.no_plots.then(|| "false".into()));
        put("checkpoints", self.no_checkpoints.then(|| "false".into()));
        s
    }
}

#[derive(Args)]
struct SourceArgs {
    /// `synthetic:<profile>:seed=N[:length=N]` or `file:<path>`.
    #[arg(long, default_value_t = format!("synthetic:quasi_periodic:seed=1:length={DEFAULT_SYNTH_LENGTH}"))]
    data: String,
    /// Seconds between readings.
    #[arg(long, default_value_t = DEFAULT_INTERVAL_SECONDS)]
    interval: f64,
}

#[derive(Args)]
struct SeriesArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProphetArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 25)]
    changepoints: usize,
    /// Longest seasonal period searched, in samples.
    #[arg(long, default_value_t = 48)]
    max_period: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Series index of the first row.
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[arg(long, default_value_t = DEFAULT_INTERVAL_SECONDS)]
    interval: f64,
}

#[derive(Args)]
struct OutlierArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn load(source: &SourceArgs) -> Result<hrbench_core::dataset::TimeSeries> {
    source.data.parse::<DataSource>()?.load(source.interval)
}

/// Columns of a numeric CSV keyed by header.
fn read_columns(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Input(format!("{} is empty", path.display())))?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    let mut cols: Vec<(String, Vec<f64>)> = header.into_iter().map(|h| (h, Vec::new())).collect();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Ingestion { line: n + 2, message: format!("expected {} cells", cols.len()) });
        }
        for (c, cell) in cols.iter_mut().zip(cells) {
            let v = cell
                .trim()
                .parse()
                .map_err(|_| Error::Ingestion { line: n + 2, message: format!("{cell:?} is not a number") })?;
            c.1.push(v);
        }
    }
    Ok(cols)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Bench(args) => {
            let mut cfg = BenchConfig::default();
            if let Some(path) = &args.config {
                cfg.apply(&load_config_file(path)?)?;
            }
            cfg.apply(&args.settings())?;
            let outcome = cmd_bench(&cfg)?;
            print!("{}", render_table(&outcome.report.table_columns()).text);
            for f in &outcome.failures {
                eprintln!("FAILED {} on {}: {}", f.model.label(), f.series, f.message);
            }
            Ok(ExitCode::from(outcome.exit_code() as u8))
        }
        Command::PlotSeries(args) => {
            let s = load(&args.source)?;
            write(&args.out, &plot_series(s.values(), s.interval_seconds(), s.id())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::PlotProphet(args) => {
            let s = load(&args.source)?;
            let max_p = args.max_period.min(s.len() / 2);
            let periods = if max_p >= 2 { dominant_periods(s.values(), max_p, 2)? } else { Vec::new() };
            let cfg = ProphetConfig {
                n_changepoints: args.changepoints,
                seasonal_periods: periods,
                ..ProphetConfig::default()
            };
            let fit = prophet_fit(s.values(), &cfg)?;
            write(&args.out, &plot_prophet(&fit, s.values(), s.interval_seconds(), s.id())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::PlotCompare(args) => {
            let mut cols = read_columns(&args.input)?;
            let pos = cols
                .iter()
                .position(|(h, _)| h.eq_ignore_ascii_case("true"))
                .ok_or_else(|| Error::Input("comparison CSV needs a `true` column".into()))?;
            let (_, truth) = cols.remove(pos);
            write(&args.out, &plot_compare(&truth, &cols, args.start, args.interval, "true vs predicted")?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Outliers(args) => {
            let s = load(&args.source)?;
            let csv = outliers_csv(&zscore_outlier_report(s.values(), args.threshold)?);
            match &args.out {
                Some(p) => write(p, &csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
