//! Deterministic SVG line charts: a raw series, a Prophet decomposition
//! and observed-versus-forecast comparisons.

use crate::classical::ProphetFit;
use crate::error::{Error, Result};
use std::fmt::Write as _;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

/// Stroke palette cycled by series position; dash patterns cycle separately
/// so neighbouring series differ in both.
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const DASHES: [&str; 4] = ["", "6 3", "2 2", "8 3 2 3"];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Data-to-pixel mapping of the plot area.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Result<Self> {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            it.fold(None, |acc: Option<(f64, f64)>, v| {
                if !v.is_finite() {
                    return acc;
                }
                Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))))
            })
        };
        let mut xs = xs;
        let mut ys = ys;
        let x = range(&mut xs).ok_or_else(|| Error::Input("nothing to plot".into()))?;
        let y = range(&mut ys).ok_or_else(|| Error::Input("nothing to plot".into()))?;
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        let (ylo, yhi) = widen(y);
        let pad = 0.05 * (yhi - ylo);
        Ok(Self { x: widen(x), y: (ylo - pad, yhi + pad) })
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

struct Canvas {
    frame: Frame,
    body: String,
    legend: Vec<(String, String, String)>,
}

impl Canvas {
    fn new(frame: Frame, title: &str, x_label: &str, y_label: &str) -> Self {
        let mut body = String::new();
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            body,
            r##"<text x="{:.2}" y="24" text-anchor="middle" font-size="16">{}</text>"##,
            (x0 + x1) / 2.0,
            escape(title)
        );
        let _ = writeln!(body, r##"<g class="axes" stroke="#000" stroke-width="1">"##);
        let _ = writeln!(body, r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"##);
        let _ = writeln!(body, r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"##);
        body.push_str("</g>\n<g class=\"ticks\" font-size=\"11\">\n");
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
            let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
            let (px, py) = (frame.px(xv), frame.py(yv));
            let _ =
                writeln!(body, r##"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##, y0 + 16.0, tick(xv));
            let _ = writeln!(
                body,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        body.push_str("</g>\n");
        let _ = writeln!(
            body,
            r##"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"##,
            (x0 + x1) / 2.0,
            HEIGHT - 14.0,
            escape(x_label)
        );
        let _ = writeln!(
            body,
            r##"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.2})">{}</text>"##,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        Self { frame, body, legend: Vec::new() }
    }

    /// Non-finite points are skipped.
    fn polyline(
        &mut self,
        class: &str,
        label: Option<&str>,
        points: &[(f64, f64)],
        color: &str,
        dash: &str,
        width: f64,
    ) {
        let mut pts = String::with_capacity(points.len() * 16);
        for &(x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            if !pts.is_empty() {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", self.frame.px(x), self.frame.py(y));
        }
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r##" stroke-dasharray="{dash}""##) };
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="{width}"{dash_attr} points="{pts}"/>"#
        );
        if let Some(l) = label {
            self.legend.push((l.to_string(), color.to_string(), dash.to_string()));
        }
    }

    fn vline(&mut self, class: &str, x: f64, color: &str) {
        let px = self.frame.px(x);
        let _ = writeln!(
            self.body,
            r##"<line class="{class}" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="4 4" stroke-width="1"/>"##,
            TOP,
            HEIGHT - BOTTOM
        );
    }

    fn finish(mut self) -> String {
        let lx = WIDTH - RIGHT + 16.0;
        for (i, (label, color, dash)) in self.legend.iter().enumerate() {
            let y = TOP + 10.0 + 20.0 * i as f64;
            let dash_attr = if dash.is_empty() { String::new() } else { format!(r##" stroke-dasharray="{dash}""##) };
            let _ = writeln!(
                self.body,
                r##"<g class="legend-entry"><line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash_attr}/><text x="{:.2}" y="{:.2}" font-size="12">{}</text></g>"##,
                lx + 24.0,
                lx + 30.0,
                y + 4.0,
                escape(label)
            );
        }
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

fn check_interval(interval_seconds: f64) -> Result<()> {
    if !(interval_seconds.is_finite() && interval_seconds > 0.0) {
        return Err(Error::Input(format!("sampling interval must be positive, got {interval_seconds}")));
    }
    Ok(())
}

/// Line plot of a series against elapsed seconds.
pub fn plot_series(values: &[f64], interval_seconds: f64, title: &str) -> Result<String> {
    if values.is_empty() {
        return Err(Error::Input("cannot plot an empty series".into()));
    }
    check_interval(interval_seconds)?;
    let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &v)| (i as f64 * interval_seconds, v)).collect();
    let frame = Frame::fit(pts.iter().map(|p| p.0), pts.iter().map(|p| p.1))?;
    let mut c = Canvas::new(frame, title, "time (s)", "heart rate (bpm)");
    c.polyline("series", None, &pts, COLORS[0], "", 1.2);
    Ok(c.finish())
}

/// Observed values, the fitted curve, the trend and one dashed marker per
/// changepoint location. `fit` must be fitted on the scale of `values`.
pub fn plot_prophet(fit: &ProphetFit, values: &[f64], interval_seconds: f64, title: &str) -> Result<String> {
    if values.is_empty() {
        return Err(Error::Input("cannot plot an empty series".into()));
    }
    check_interval(interval_seconds)?;
    let secs = |i: usize| i as f64 * interval_seconds;
    let observed: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &v)| (secs(i), v)).collect();
    let fitted: Vec<(f64, f64)> = (0..values.len()).map(|i| (secs(i), fit.predict(i as f64))).collect();
    let trend: Vec<(f64, f64)> = (0..values.len()).map(|i| (secs(i), fit.trend(i as f64))).collect();
    let all_y = observed.iter().chain(&fitted).chain(&trend).map(|p| p.1);
    let frame = Frame::fit(observed.iter().map(|p| p.0), all_y)?;
    let mut c = Canvas::new(frame, title, "time (s)", "heart rate (bpm)");
    c.polyline("observed", Some("observed"), &observed, "#9ecae1", "", 1.0);
    c.polyline("fitted", Some("fit"), &fitted, "#08519c", "", 1.2);
    c.polyline("trend", Some("trend"), &trend, "#d62728", "", 2.0);
    for &loc in &fit.changepoint_locations {
        c.vline("changepoint", secs(loc), "#636363");
    }
    Ok(c.finish())
}

/// Ground truth plus one polyline per model. Every prediction array must
/// match the truth's length; `start_index` is the series index of the
/// first point.
pub fn plot_compare(
    truth: &[f64],
    predictions: &[(String, Vec<f64>)],
    start_index: usize,
    interval_seconds: f64,
    title: &str,
) -> Result<String> {
    if truth.is_empty() {
        return Err(Error::Input("cannot plot an empty series".into()));
    }
    check_interval(interval_seconds)?;
    if let Some((name, p)) = predictions.iter().find(|(_, p)| p.len() != truth.len()) {
        return Err(Error::Input(format!("{name} has {} predictions for {} true values", p.len(), truth.len())));
    }
    let secs = |i: usize| (start_index + i) as f64 * interval_seconds;
    let line = |v: &[f64]| -> Vec<(f64, f64)> { v.iter().enumerate().map(|(i, &y)| (secs(i), y)).collect() };
    let truth_pts = line(truth);
    let all_y = truth.iter().chain(predictions.iter().flat_map(|(_, p)| p.iter())).copied();
    let frame = Frame::fit(truth_pts.iter().map(|p| p.0), all_y)?;
    let mut c = Canvas::new(frame, title, "time (s)", "heart rate (bpm)");
    c.polyline("truth", Some("true values"), &truth_pts, "#000", "", 1.6);
    for (k, (name, p)) in predictions.iter().enumerate() {
        c.polyline("prediction", Some(name), &line(p), COLORS[k % COLORS.len()], DASHES[(k + 1) % DASHES.len()], 1.2);
    }
    Ok(c.finish())
}
