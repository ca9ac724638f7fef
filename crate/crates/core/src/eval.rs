//! Error metrics on original-scale forecasts, per-fold forecast collection
//! and the model comparison table.

use crate::classical::{auto_sarima, dominant_periods, prophet_fit_at, prophet_forecast, GridBounds, ProphetConfig};
use crate::dataset::{fit_fold_normalization, FoldSpec, NormalizationMode, WindowGeometry};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::train::FoldSnapshot;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() || y.len() != yhat.len() {
        return Err(Error::Input(format!("metric needs equal nonzero lengths, got {} and {}", y.len(), yhat.len())));
    }
    Ok(())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Mean absolute percentage error as a fraction.
pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if let Some(i) = y.iter().position(|v| *v == 0.0) {
        return Err(Error::DivisionDomain(format!("true value at position {i} is zero")));
    }
    Ok(y.iter().zip(yhat).map(|(a, b)| ((a - b) / a).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok((y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mape: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Self { mae: mae(y, yhat)?, mape: mape(y, yhat)?, rmse: rmse(y, yhat)? })
    }

    /// Component-wise arithmetic mean.
    pub fn mean(items: &[Metrics]) -> Option<Metrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        Some(Metrics {
            mae: items.iter().map(|m| m.mae).sum::<f64>() / n,
            mape: items.iter().map(|m| m.mape).sum::<f64>() / n,
            rmse: items.iter().map(|m| m.rmse).sum::<f64>() / n,
        })
    }
}

/// Concatenated original-scale forecasts of every fold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastSet {
    pub horizon: usize,
    /// Series index of each forecast's first target.
    pub starts: Vec<usize>,
    pub targets: Vec<f64>,
    pub predictions: Vec<f64>,
}

impl ForecastSet {
    fn new(horizon: usize) -> Self {
        Self { horizon, ..Self::default() }
    }

    fn push(&mut self, start: usize, target: &[f64], prediction: &[f64]) {
        self.starts.push(start);
        self.targets.extend_from_slice(target);
        self.predictions.extend_from_slice(prediction);
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn metrics(&self) -> Result<Metrics> {
        Metrics::compute(&self.targets, &self.predictions)
    }

    /// First-step forecast per target index, for plotting.
    pub fn one_step_path(&self) -> Vec<(usize, f64)> {
        self.starts.iter().enumerate().map(|(k, &s)| (s, self.predictions[k * self.horizon])).collect()
    }
}

/// Each fold's snapshot forecasts its own stride-1 validation windows.
pub fn neural_forecasts(
    snapshots: &[FoldSnapshot],
    values: &[f64],
    folds: &[FoldSpec],
    geometry: WindowGeometry,
) -> Result<ForecastSet> {
    let (l, h) = (geometry.lookback, geometry.horizon);
    let mut out = ForecastSet::new(h);
    for fold in folds {
        let snap = snapshots
            .iter()
            .find(|s| s.fold_index == fold.fold_index)
            .ok_or_else(|| Error::Evaluation(format!("no trained snapshot for fold {}", fold.fold_index)))?;
        let idx: Vec<usize> = fold.val_indices.clone().collect();
        let inputs: Vec<f64> = idx
            .iter()
            .flat_map(|&i| {
                let s = geometry.window_span(i).start;
                values[s..s + l].iter().map(|&v| snap.norm.apply(v))
            })
            .collect();
        let preds = snap.model.predict(&inputs)?;
        for (k, &i) in idx.iter().enumerate() {
            let t = geometry.target_span(i);
            let p: Vec<f64> = preds[k * h..(k + 1) * h].iter().map(|&v| snap.norm.invert(v)).collect();
            out.push(t.start, &values[t.clone()], &p);
        }
    }
    Ok(out)
}

/// Constant forecasts over the stride-1 validation windows: the last input
/// value for [`ModelKind::Naive`], the training-span mean for [`ModelKind::Mean`].
pub fn baseline_forecasts(
    kind: ModelKind,
    values: &[f64],
    folds: &[FoldSpec],
    geometry: WindowGeometry,
) -> Result<ForecastSet> {
    let h = geometry.horizon;
    let mut out = ForecastSet::new(h);
    for fold in folds {
        let train: Vec<f64> =
            fold.train_segments(&geometry).into_iter().flat_map(|r| values[r].iter().copied()).collect();
        let mean = train.iter().sum::<f64>() / train.len().max(1) as f64;
        for i in fold.val_indices.clone() {
            let t = geometry.target_span(i);
            let level = match kind {
                ModelKind::Naive => values[t.start - 1],
                ModelKind::Mean if !train.is_empty() => mean,
                ModelKind::Mean => {
                    return Err(Error::Evaluation(format!("fold {} has no training data", fold.fold_index)))
                }
                other => return Err(Error::Config(format!("{other} is not a baseline"))),
            };
            out.push(t.start, &values[t], &vec![level; h]);
        }
    }
    Ok(out)
}

/// Settings for the per-fold SARIMA and Prophet refits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOptions {
    /// Longest seasonal period searched, in samples.
    pub max_period: usize,
    pub grid: GridBounds,
    pub prophet: ProphetConfig,
    /// Seasonal terms given to Prophet when its config names none.
    pub prophet_seasonalities: usize,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self {
            max_period: 48,
            grid: GridBounds::default(),
            prophet: ProphetConfig::default(),
            prophet_seasonalities: 2,
        }
    }
}

/// Refits SARIMA or Prophet on each fold's normalized training span and
/// forecasts the validation span in horizon-length strides. SARIMA
/// conditions on every observation before each forecast origin. Prophet
/// seasonal periods default to the strongest periodogram peaks of the
/// longest training segment.
pub fn classical_forecasts(
    kind: ModelKind,
    values: &[f64],
    folds: &[FoldSpec],
    geometry: WindowGeometry,
    mode: NormalizationMode,
    opts: &ClassicalOptions,
) -> Result<ForecastSet> {
    let h = geometry.horizon;
    let mut out = ForecastSet::new(h);
    for fold in folds {
        let norm = fit_fold_normalization(values, fold, &geometry, mode)?;
        let z: Vec<f64> = values.iter().map(|&v| norm.apply(v)).collect();
        let segments = fold.train_segments(&geometry);
        let origins: Vec<usize> = fold.val_indices.clone().step_by(h).map(|i| geometry.target_span(i).start).collect();
        let forecasts: Vec<Vec<f64>> = match kind {
            ModelKind::Sarima => {
                let slices: Vec<&[f64]> = segments.iter().map(|r| &z[r.clone()]).collect();
                let fit = auto_sarima(&slices, opts.max_period, opts.grid)?;
                log::info!("fold {}: SARIMA {} AIC {:.3}", fold.fold_index, fit.order, fit.aic);
                origins.iter().map(|&t| fit.forecast(&z[..t], h)).collect::<Result<_>>()?
            }
            ModelKind::Prophet => {
                let times: Vec<usize> = segments.iter().flat_map(|r| r.clone()).collect();
                let y: Vec<f64> = times.iter().map(|&t| z[t]).collect();
                let mut cfg = opts.prophet.clone();
                if cfg.seasonal_periods.is_empty() && opts.prophet_seasonalities > 0 {
                    let longest = segments.iter().max_by_key(|r| r.len()).expect("training segments exist");
                    let max_p = opts.max_period.min(longest.len() / 2);
                    if max_p >= 2 {
                        cfg.seasonal_periods =
                            dominant_periods(&z[longest.clone()], max_p, opts.prophet_seasonalities)?;
                    }
                    log::info!("fold {}: Prophet seasonal periods {:?}", fold.fold_index, cfg.seasonal_periods);
                }
                let fit = prophet_fit_at(&times, &y, &cfg)?;
                origins
                    .iter()
                    .map(|&t| prophet_forecast(&fit, &(t..t + h).collect::<Vec<_>>()))
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Config(format!("{other} is not a classical model"))),
        };
        for (t, f) in origins.iter().zip(forecasts) {
            let p: Vec<f64> = f.iter().map(|&v| norm.invert(v)).collect();
            out.push(*t, &values[*t..*t + h], &p);
        }
    }
    Ok(out)
}

// ---- report ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: ModelKind,
    pub series: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub seed: u64,
    /// Architecture digest per neural model id.
    pub config_digests: BTreeMap<String, String>,
    pub fold_scheme: String,
}

impl EvalReport {
    /// Models in first-appearance order.
    pub fn models(&self) -> Vec<ModelKind> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.model) {
                out.push(r.model);
            }
        }
        out
    }

    /// Mean of a model's per-series metrics.
    pub fn average(&self, model: ModelKind) -> Option<Metrics> {
        let items: Vec<Metrics> = self.rows.iter().filter(|r| r.model == model).map(|r| r.metrics).collect();
        Metrics::mean(&items)
    }

    /// `model,series,mae,mape,rmse` with one `AVG` row per model.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,series,mae,mape,rmse\n");
        let line = |s: &mut String, model: &str, series: &str, m: &Metrics| {
            let _ = writeln!(s, "{model},{series},{:.6},{:.6},{:.6}", m.mae, m.mape, m.rmse);
        };
        for r in &self.rows {
            line(&mut s, r.model.label(), &r.series, &r.metrics);
        }
        for m in self.models() {
            if let Some(avg) = self.average(m) {
                line(&mut s, m.label(), "AVG", &avg);
            }
        }
        s
    }

    pub fn table_columns(&self) -> Vec<TableColumn> {
        self.models()
            .into_iter()
            .filter_map(|m| self.average(m).map(|a| TableColumn::from_metrics(m.label(), &a)))
            .collect()
    }
}

/// One model column of the comparison table, values already rounded to
/// three decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct TableColumn {
    pub label: String,
    pub mae: String,
    pub mape: String,
    pub rmse: String,
}

impl TableColumn {
    pub fn from_metrics(label: &str, m: &Metrics) -> Self {
        Self {
            label: label.to_string(),
            mae: format!("{:.3}", m.mae),
            mape: format!("{:.3}", m.mape),
            rmse: format!("{:.3}", m.rmse),
        }
    }

    fn values(&self) -> [&str; 3] {
        [&self.mae, &self.mape, &self.rmse]
    }
}

pub const TABLE_ROWS: [&str; 3] = ["Avg MAE", "Avg MAPE", "Avg RMSE"];

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    /// Aligned text; the best value in each row carries a `*`.
    pub text: String,
    pub csv: String,
    /// Column labels, left to right.
    pub order: Vec<String>,
}

fn numeric(s: &str) -> f64 {
    s.parse().unwrap_or(f64::INFINITY)
}

/// Columns sorted by Avg MAE ascending (stable on ties).
pub fn render_table(columns: &[TableColumn]) -> RenderedTable {
    let mut cols: Vec<&TableColumn> = columns.iter().collect();
    cols.sort_by(|a, b| numeric(&a.mae).total_cmp(&numeric(&b.mae)));
    let mut csv = String::from("metric");
    for c in &cols {
        csv.push(',');
        csv.push_str(&c.label);
    }
    csv.push('\n');
    for (r, name) in TABLE_ROWS.iter().enumerate() {
        csv.push_str(name);
        for c in &cols {
            csv.push(',');
            csv.push_str(c.values()[r]);
        }
        csv.push('\n');
    }

    let cells: Vec<Vec<String>> = TABLE_ROWS
        .iter()
        .enumerate()
        .map(|(r, _)| {
            let best = cols.iter().map(|c| numeric(c.values()[r])).fold(f64::INFINITY, f64::min);
            cols.iter()
                .map(|c| {
                    let v = c.values()[r];
                    if numeric(v) == best {
                        format!("{v}*")
                    } else {
                        v.to_string()
                    }
                })
                .collect()
        })
        .collect();
    let first = TABLE_ROWS.iter().map(|s| s.len()).max().unwrap_or(0).max("Metric".len());
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| cells.iter().map(|row| row[j].len()).max().unwrap_or(0).max(c.label.len()))
        .collect();
    let mut text = format!("{:<first$}", "Metric");
    for (c, w) in cols.iter().zip(&widths) {
        let _ = write!(text, "  {:>w$}", c.label);
    }
    text.push('\n');
    for (r, name) in TABLE_ROWS.iter().enumerate() {
        let _ = write!(text, "{name:<first$}");
        for (cell, w) in cells[r].iter().zip(&widths) {
            let _ = write!(text, "  {cell:>w$}");
        }
        text.push('\n');
    }
    RenderedTable { text, csv, order: cols.iter().map(|c| c.label.clone()).collect() }
}

/// Parses the table CSV layout: a `metric,<label>...` header followed by
/// the three `Avg` rows. Cell text is kept verbatim.
pub fn parse_table_csv(text: &str) -> Result<Vec<TableColumn>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Input("empty table".into()))?.split(',').collect();
    if header.first().map(|s| s.trim()) != Some("metric") || header.len() < 2 {
        return Err(Error::Input("table header must start with `metric` and name ≥ 1 model".into()));
    }
    let mut rows: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Ingestion {
                line: n + 2,
                message: format!("expected {} cells, found {}", header.len(), cells.len()),
            });
        }
        let name = TABLE_ROWS
            .iter()
            .find(|r| **r == cells[0].trim())
            .ok_or_else(|| Error::Ingestion { line: n + 2, message: format!("unknown row {:?}", cells[0]) })?;
        rows.insert(name, cells[1..].iter().map(|c| c.trim().to_string()).collect());
    }
    let get = |name: &str| rows.get(name).ok_or_else(|| Error::Input(format!("table lacks the {name} row")));
    let (m, p, r) = (get(TABLE_ROWS[0])?, get(TABLE_ROWS[1])?, get(TABLE_ROWS[2])?);
    Ok(header[1..]
        .iter()
        .enumerate()
        .map(|(j, label)| TableColumn {
            label: label.trim().to_string(),
            mae: m[j].clone(),
            mape: p[j].clone(),
            rmse: r[j].clone(),
        })
        .collect())
}
