//! Piecewise-linear trend plus Fourier seasonality, fitted as penalized
//! least squares by coordinate descent.
//!
//! Internally time is rescaled to `[0, 1]` over the training span so the
//! rate-delta penalty does not depend on series length; every reported
//! quantity is in sample-index units.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TOLERANCE: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProphetConfig {
    pub n_changepoints: usize,
    pub changepoint_prior_scale: f64,
    pub seasonality_prior_scale: f64,
    /// Harmonics per period, clamped to `⌊period/2⌋`.
    pub fourier_order: usize,
    /// Seasonal periods in samples.
    pub seasonal_periods: Vec<f64>,
}

impl Default for ProphetConfig {
    fn default() -> Self {
        Self {
            n_changepoints: 25,
            changepoint_prior_scale: 0.05,
            seasonality_prior_scale: 10.0,
            fourier_order: 10,
            seasonal_periods: Vec::new(),
        }
    }
}

impl ProphetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.changepoint_prior_scale > 0.0 && self.seasonality_prior_scale > 0.0) {
            return Err(Error::Config("prior scales must be positive".into()));
        }
        if !self.seasonal_periods.is_empty() && self.fourier_order == 0 {
            return Err(Error::Config("fourier_order must be ≥ 1 when periods are configured".into()));
        }
        if let Some(p) = self.seasonal_periods.iter().find(|p| !(**p >= 2.0)) {
            return Err(Error::Config(format!("seasonal period {p} must be ≥ 2 samples")));
        }
        Ok(())
    }

    fn harmonics(&self) -> Vec<usize> {
        self.seasonal_periods.iter().map(|p| self.fourier_order.min((p / 2.0).floor() as usize).max(1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProphetFit {
    /// Trend slope before the first changepoint, per sample.
    pub base_rate: f64,
    /// Trend value at sample index 0.
    pub offset: f64,
    /// Slope change at each changepoint, per sample.
    pub rate_deltas: Vec<f64>,
    pub changepoint_locations: Vec<usize>,
    pub seasonal_periods: Vec<f64>,
    pub harmonics: Vec<usize>,
    /// Per period, per harmonic `n`: `[sin coefficient, cos coefficient]`.
    pub fourier_coeffs: Vec<f64>,
    pub sweeps: usize,
    pub objective: f64,
    pub rss: f64,
}

impl ProphetFit {
    /// Continuous piecewise-linear trend.
    pub fn trend(&self, t: f64) -> f64 {
        let mut v = self.offset + self.base_rate * t;
        for (d, &c) in self.rate_deltas.iter().zip(&self.changepoint_locations) {
            v += d * (t - c as f64).max(0.0);
        }
        v
    }

    pub fn seasonality(&self, t: f64) -> f64 {
        let mut v = 0.0;
        let mut idx = 0;
        for (p, &k) in self.seasonal_periods.iter().zip(&self.harmonics) {
            for n in 1..=k {
                let arg = 2.0 * PI * n as f64 * t / p;
                v += self.fourier_coeffs[idx] * arg.sin() + self.fourier_coeffs[idx + 1] * arg.cos();
                idx += 2;
            }
        }
        v
    }

    pub fn predict(&self, t: f64) -> f64 {
        self.trend(t) + self.seasonality(t)
    }

    /// Amplitude of harmonic `n` (1-based) of the `period_index`-th period.
    pub fn amplitude(&self, period_index: usize, n: usize) -> f64 {
        let offset: usize = self.harmonics[..period_index].iter().sum::<usize>() * 2;
        let i = offset + 2 * (n - 1);
        self.fourier_coeffs[i].hypot(self.fourier_coeffs[i + 1])
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("bad Prophet document: {e}")))
    }
}

pub fn prophet_forecast(fit: &ProphetFit, t_future: &[usize]) -> Result<Vec<f64>> {
    if t_future.is_empty() {
        return Err(Error::Input("no forecast indices".into()));
    }
    Ok(t_future.iter().map(|&t| fit.predict(t as f64)).collect())
}

/// Fits on `y[t]` observed at `t = 0..y.len()`.
pub fn prophet_fit(y: &[f64], cfg: &ProphetConfig) -> Result<ProphetFit> {
    let times: Vec<usize> = (0..y.len()).collect();
    prophet_fit_at(&times, y, cfg)
}

/// Fits on observations at strictly increasing sample indices `times`
/// (gaps allowed, e.g. a training span split by a validation block).
pub fn prophet_fit_at(times: &[usize], y: &[f64], cfg: &ProphetConfig) -> Result<ProphetFit> {
    cfg.validate()?;
    if times.len() != y.len() {
        return Err(Error::dim(format!("{} times for {} values", times.len(), y.len())));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("observation times must be strictly increasing".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("series contains non-finite values".into()));
    }
    let harmonics = cfg.harmonics();
    let n_fourier: usize = harmonics.iter().sum::<usize>() * 2;
    let required = 2 * (cfg.n_changepoints + n_fourier) + 1;
    if y.len() < required.max(3) {
        return Err(Error::InsufficientData {
            what: "observations for the Prophet design",
            required: required.max(3),
            available: y.len(),
        });
    }

    let n = y.len();
    let t0 = times[0] as f64;
    let span = (times[n - 1] - times[0]) as f64;
    let scaled = |t: f64| (t - t0) / span;

    // Changepoints at evenly spaced observation rows of the first 80%.
    let last_row = ((n - 1) as f64 * 0.8).floor() as usize;
    let mut changepoints: Vec<usize> = (1..=cfg.n_changepoints)
        .map(|j| times[(j as f64 * last_row as f64 / cfg.n_changepoints as f64).round() as usize])
        .filter(|&c| c > times[0])
        .collect();
    changepoints.dedup();
    let n_cp = changepoints.len();

    // Columns: offset, slope, hinges, Fourier pairs.
    let n_cols = 2 + n_cp + n_fourier;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for &t in times {
        let t = t as f64;
        let tau = scaled(t);
        let mut r = Vec::with_capacity(n_cols);
        r.push(1.0);
        r.push(tau);
        for &c in &changepoints {
            r.push((tau - scaled(c as f64)).max(0.0));
        }
        for (p, &k) in cfg.seasonal_periods.iter().zip(&harmonics) {
            for h in 1..=k {
                let arg = 2.0 * PI * h as f64 * t / p;
                r.push(arg.sin());
                r.push(arg.cos());
            }
        }
        rows.push(r);
    }
    let mut gram = vec![0.0; n_cols * n_cols];
    let mut xty = vec![0.0; n_cols];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..n_cols {
            xty[i] += r[i] * yi;
            for j in i..n_cols {
                gram[i * n_cols + j] += r[i] * r[j];
            }
        }
    }
    for i in 0..n_cols {
        for j in 0..i {
            gram[i * n_cols + j] = gram[j * n_cols + i];
        }
    }
    let yty: f64 = y.iter().map(|v| v * v).sum();

    let l1 = 1.0 / cfg.changepoint_prior_scale;
    let l2 = 1.0 / cfg.seasonality_prior_scale.powi(2);
    let hinge = 2..2 + n_cp;
    let fourier = 2 + n_cp..n_cols;
    let rss_of = |w: &[f64], gw: &[f64]| -> f64 {
        let wgw: f64 = w.iter().zip(gw).map(|(a, b)| a * b).sum();
        let wxy: f64 = w.iter().zip(&xty).map(|(a, b)| a * b).sum();
        (yty - 2.0 * wxy + wgw).max(0.0)
    };
    let objective = |w: &[f64], gw: &[f64]| -> f64 {
        0.5 * rss_of(w, gw)
            + l1 * w[hinge.clone()].iter().map(|v| v.abs()).sum::<f64>()
            + l2 * w[fourier.clone()].iter().map(|v| v * v).sum::<f64>()
    };

    // The smooth block (offset, slope, Fourier) is profiled out exactly, which
    // leaves a lasso over the rate deltas; coordinate descent runs on that.
    let smooth: Vec<usize> = (0..2).chain(fourier.clone()).collect();
    let (ns, nh) = (smooth.len(), n_cp);
    let g = |i: usize, j: usize| gram[i * n_cols + j];
    let a = DMatrix::from_fn(ns, ns, |r, c| {
        let ridge = if r == c && fourier.contains(&smooth[r]) { 2.0 * l2 } else { 0.0 };
        g(smooth[r], smooth[c]) + ridge
    });
    let chol = a.clone().cholesky().ok_or_else(|| Error::FitFailure {
        message: "trend/seasonality design is rank deficient".into(),
        best_objective: None,
    })?;
    let g_sh = DMatrix::from_fn(ns, nh, |r, c| g(smooth[r], 2 + c));
    let b_s = DVector::from_fn(ns, |r, _| xty[smooth[r]]);
    let solve_gsh = chol.solve(&g_sh);
    let solve_b = chol.solve(&b_s);
    let reduced = DMatrix::from_fn(nh, nh, |r, c| g(2 + r, 2 + c)) - g_sh.transpose() * &solve_gsh;
    let linear = DVector::from_fn(nh, |r, _| xty[2 + r]) - g_sh.transpose() * &solve_b;

    let lasso_objective = |d: &[f64], md: &[f64]| -> f64 {
        d.iter().zip(md).zip(linear.iter()).map(|((di, mi), ci)| 0.5 * di * mi - ci * di + l1 * di.abs()).sum()
    };
    let mut deltas = vec![0.0; nh];
    let mut md = vec![0.0; nh];
    let mut prev = 0.0;
    let mut sweeps = 0;
    let mut converged = nh == 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for j in 0..nh {
            let mjj = reduced[(j, j)];
            if mjj <= 0.0 {
                continue;
            }
            let rho = linear[j] - (md[j] - mjj * deltas[j]);
            let step = soft_threshold(rho, l1) / mjj - deltas[j];
            if step != 0.0 {
                for (i, m) in md.iter_mut().enumerate() {
                    *m += reduced[(i, j)] * step;
                }
                deltas[j] += step;
            }
        }
        let obj = lasso_objective(&deltas, &md);
        converged = (prev - obj).abs() < TOLERANCE;
        prev = obj;
    }
    if !converged {
        return Err(Error::FitFailure {
            message: format!("coordinate descent did not converge in {MAX_SWEEPS} sweeps"),
            best_objective: Some(prev),
        });
    }

    let w_smooth = solve_b - solve_gsh * DVector::from_column_slice(&deltas);
    let mut w = vec![0.0; n_cols];
    for (r, &i) in smooth.iter().enumerate() {
        w[i] = w_smooth[r];
    }
    w[hinge.clone()].copy_from_slice(&deltas);
    let gw: Vec<f64> = (0..n_cols).map(|i| (0..n_cols).map(|j| g(i, j) * w[j]).sum()).collect();
    let prev = objective(&w, &gw);

    // Back to sample units: tau = (t − t0)/span.
    let rate = w[1] / span;
    let rate_deltas: Vec<f64> = w[hinge.clone()].iter().map(|d| d / span).collect();
    Ok(ProphetFit {
        base_rate: rate,
        offset: w[0] - rate * t0,
        rate_deltas,
        changepoint_locations: changepoints,
        seasonal_periods: cfg.seasonal_periods.clone(),
        harmonics,
        fourier_coeffs: w[fourier].to_vec(),
        sweeps,
        objective: prev,
        rss: rss_of(&w, &gw),
    })
}

fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Periodogram power a peak must exceed, as a multiple of the median power.
const PEAK_POWER_RATIO: f64 = 20.0;
/// Zero-padding factor of the periodogram grid.
const PAD_FACTOR: usize = 8;

/// Up to `count` seasonal periods in `[2, max_period]`, strongest first,
/// read off the Hann-tapered, zero-padded periodogram of `y` and refined by
/// parabolic interpolation, so periods come out fractional. A peak must
/// clear a noise floor; peaks within four native bins of a chosen one or
/// at an integer fraction of a chosen period are skipped.
pub fn dominant_periods(y: &[f64], max_period: usize, count: usize) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 2 * max_period.max(2) {
        return Err(Error::InsufficientData {
            what: "readings for periodogram (2 × max period)",
            required: 2 * max_period.max(2),
            available: n,
        });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let padded_len = (n * PAD_FACTOR).next_power_of_two();
    let mut x = vec![0.0; padded_len];
    for (i, v) in y.iter().enumerate() {
        let taper = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
        x[i] = (v - mean) * taper;
    }
    let power: Vec<f64> = crate::tensor::rfft_magnitudes(&x)?.into_iter().map(|m| m * m).collect();
    let mut sorted: Vec<f64> = power[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = PEAK_POWER_RATIO * sorted[sorted.len() / 2];
    let scale = padded_len as f64;
    let mut peaks: Vec<(f64, f64)> = (1..power.len() - 1)
        .filter(|&k| power[k] > power[k - 1] && power[k] >= power[k + 1] && power[k] > floor)
        .filter_map(|k| {
            // Vertex of the parabola through the log powers around the peak.
            let (a, b, c) = (power[k - 1].ln(), power[k].ln(), power[k + 1].ln());
            let denom = a - 2.0 * b + c;
            let shift = if denom < 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            let period = scale / (k as f64 + shift);
            (period >= 2.0 && period <= max_period as f64).then_some((period, power[k]))
        })
        .collect();
    peaks.sort_by(|p, q| q.1.total_cmp(&p.1));
    let native_bin = scale / n as f64;
    let mut chosen: Vec<f64> = Vec::new();
    for (period, _) in peaks {
        if chosen.len() == count {
            break;
        }
        let too_close = chosen.iter().any(|&c| (scale / c - scale / period).abs() < 4.0 * native_bin);
        let harmonic = chosen.iter().any(|&c| {
            let ratio = c / period;
            ratio > 1.5 && (ratio - ratio.round()).abs() < 0.02 * ratio
        });
        if !too_close && !harmonic {
            chosen.push(period);
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cfg() -> ProphetConfig {
        ProphetConfig { changepoint_prior_scale: 1e-3, ..Default::default() }
    }

    #[test]
    fn pure_line_is_recovered() {
        let y: Vec<f64> = (0..300).map(|t| 2.0 * t as f64 + 1.0).collect();
        let f = prophet_fit(&y, &line_cfg()).unwrap();
        assert!((f.base_rate - 2.0).abs() < 1e-3, "{}", f.base_rate);
        assert!((f.offset - 1.0).abs() < 1e-3, "{}", f.offset);
        assert!(f.rate_deltas.iter().all(|d| d.abs() < 1e-3));
        let ahead = prophet_forecast(&f, &(300..310).collect::<Vec<_>>()).unwrap();
        for (i, v) in ahead.iter().enumerate() {
            assert!((v - (2.0 * (300 + i) as f64 + 1.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn sinusoid_amplitude_is_recovered() {
        let y: Vec<f64> = (0..600).map(|t| 3.0 * (2.0 * PI * t as f64 / 50.0).sin()).collect();
        let cfg = ProphetConfig { seasonal_periods: vec![50.0], ..Default::default() };
        let f = prophet_fit(&y, &cfg).unwrap();
        assert!((f.amplitude(0, 1) - 3.0).abs() < 0.15, "{}", f.amplitude(0, 1));
    }

    #[test]
    fn changepoints_sit_in_first_eighty_percent() {
        let y: Vec<f64> = (0..500).map(|t| (t as f64 * 0.1).sin() + 5.0).collect();
        let f = prophet_fit(&y, &ProphetConfig::default()).unwrap();
        assert_eq!(f.changepoint_locations.len(), 25);
        assert!(f.changepoint_locations.windows(2).all(|w| w[0] < w[1]));
        assert!(f.changepoint_locations.iter().all(|&c| c as f64 <= 0.8 * 499.0));
    }

    #[test]
    fn in_sample_forecast_equals_fitted_values() {
        let y: Vec<f64> = (0..200).map(|t| (t as f64 * 0.3).cos() + t as f64 * 0.01).collect();
        let cfg = ProphetConfig { seasonal_periods: vec![21.0], ..Default::default() };
        let f = prophet_fit(&y, &cfg).unwrap();
        let idx: Vec<usize> = (0..200).collect();
        let fc = prophet_forecast(&f, &idx).unwrap();
        let rss: f64 = fc.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((rss - f.rss).abs() < 1e-6 * (1.0 + rss));
    }

    #[test]
    fn zero_fourier_coefficients_leave_trend() {
        let mut f = prophet_fit(
            &(0..100).map(|t| t as f64).collect::<Vec<_>>(),
            &ProphetConfig { seasonal_periods: vec![10.0], n_changepoints: 3, ..Default::default() },
        )
        .unwrap();
        f.fourier_coeffs.iter_mut().for_each(|c| *c = 0.0);
        assert_eq!(f.predict(120.0), f.trend(120.0));
    }

    #[test]
    fn too_short_series_is_rejected() {
        let cfg = ProphetConfig::default();
        assert!(matches!(prophet_fit(&[1.0; 40], &cfg), Err(Error::InsufficientData { .. })));
        assert!(prophet_forecast(
            &prophet_fit(&[1.0, 2.0, 3.0, 4.0], &ProphetConfig { n_changepoints: 0, ..cfg }).unwrap(),
            &[]
        )
        .is_err());
    }
}
