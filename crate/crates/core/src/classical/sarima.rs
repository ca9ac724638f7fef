//! Seasonal ARIMA fitted by conditional sum of squares.
//!
//! Sign conventions: the AR side is `(1 − Σ φᵢBⁱ)(1 − Σ ΦⱼBʲˢ)` and the MA
//! side is `(1 + Σ θᵢBⁱ)(1 + Σ ΘⱼBʲˢ)`.

use super::nelder_mead::{self, NelderMeadOptions};
use crate::dataset::autocorrelation;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Partial autocorrelations are kept inside this radius so every returned
/// polynomial is strictly stationary / invertible.
const PACF_BOUND: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub ar: usize,
    pub diff: usize,
    pub ma: usize,
    pub seasonal_ar: usize,
    pub seasonal_diff: usize,
    pub seasonal_ma: usize,
    pub period: usize,
}

impl SarimaOrder {
    pub fn new(
        (ar, diff, ma): (usize, usize, usize),
        (seasonal_ar, seasonal_diff, seasonal_ma): (usize, usize, usize),
        period: usize,
    ) -> Result<Self> {
        let o = Self { ar, diff, ma, seasonal_ar, seasonal_diff, seasonal_ma, period };
        o.validate()?;
        Ok(o)
    }

    /// Non-seasonal `(p, d, q)` only.
    pub fn arima(ar: usize, diff: usize, ma: usize) -> Result<Self> {
        Self::new((ar, diff, ma), (0, 0, 0), 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.diff + self.seasonal_diff > 2 {
            return Err(Error::Config(format!("{self}: total differencing must be ≤ 2")));
        }
        let seasonal = self.seasonal_ar + self.seasonal_diff + self.seasonal_ma > 0;
        if seasonal && self.period < 2 {
            return Err(Error::Config(format!("{self}: seasonal terms need a period ≥ 2")));
        }
        if self.period == 0 {
            return Err(Error::Config("seasonal period must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn has_intercept(&self) -> bool {
        self.diff + self.seasonal_diff == 0
    }

    /// Count of AR/MA coefficients.
    pub fn arma_terms(&self) -> usize {
        self.ar + self.ma + self.seasonal_ar + self.seasonal_ma
    }

    /// Estimated parameters including intercept (when present) and variance.
    pub fn n_params(&self) -> usize {
        self.arma_terms() + usize::from(self.has_intercept()) + 1
    }

    /// Observations consumed by differencing.
    pub fn diff_loss(&self) -> usize {
        self.diff + self.seasonal_diff * self.period
    }

    pub fn max_ar_lag(&self) -> usize {
        self.ar + self.seasonal_ar * self.period
    }

    fn min_length(&self) -> usize {
        self.diff_loss()
            + self.ar.max(self.ma).max(self.seasonal_ar * self.period).max(self.seasonal_ma * self.period)
            + 10
    }

    fn lex_key(&self) -> [usize; 6] {
        [self.ar, self.diff, self.ma, self.seasonal_ar, self.seasonal_diff, self.seasonal_ma]
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})[{}]",
            self.ar, self.diff, self.ma, self.seasonal_ar, self.seasonal_diff, self.seasonal_ma, self.period
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaFit {
    pub order: SarimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub seasonal_ar_coeffs: Vec<f64>,
    pub seasonal_ma_coeffs: Vec<f64>,
    /// Mean of the (undifferenced) process; zero whenever differencing is applied.
    pub intercept: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Residuals entering the conditional likelihood.
    pub n_obs: usize,
}

/// Maps unconstrained values to partial autocorrelations in
/// `(−PACF_BOUND, PACF_BOUND)` and then, by the Durbin-Levinson recursion,
/// to the coefficients of a stationary `1 − Σ aᵢBⁱ`.
pub fn pacf_to_coeffs(raw: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(raw.len());
    for (k, &u) in raw.iter().enumerate() {
        let r = PACF_BOUND * u.tanh();
        let prev = a.clone();
        for j in 0..k {
            a[j] = prev[j] - r * prev[k - 1 - j];
        }
        a.push(r);
    }
    a
}

/// Inverse of [`pacf_to_coeffs`] for coefficients inside its image.
pub fn coeffs_to_pacf(coeffs: &[f64]) -> Vec<f64> {
    let mut a = coeffs.to_vec();
    let mut raw = vec![0.0; a.len()];
    for k in (0..a.len()).rev() {
        let r = a[k].clamp(-PACF_BOUND * 0.999_999, PACF_BOUND * 0.999_999);
        raw[k] = (r / PACF_BOUND).atanh();
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for j in 0..k {
            a[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
    }
    raw
}

/// Sparse lag polynomial: `(lag, coefficient)` for lags ≥ 1.
type Lags = Vec<(usize, f64)>;

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Dense polynomial `1 + sign·Σ cᵢ B^{i·step}`.
fn lag_poly(coeffs: &[f64], step: usize, sign: f64) -> Vec<f64> {
    let mut p = vec![0.0; coeffs.len() * step + 1];
    p[0] = 1.0;
    for (i, c) in coeffs.iter().enumerate() {
        p[(i + 1) * step] = sign * c;
    }
    p
}

fn nonzero_lags(poly: &[f64], sign: f64) -> Lags {
    poly.iter().enumerate().skip(1).filter(|(_, c)| **c != 0.0).map(|(l, c)| (l, sign * c)).collect()
}

/// Expanded `(ar, ma)` lag lists such that
/// `x_t = Σ ar·x_{t−l} + e_t + Σ ma·e_{t−l}`.
fn expand(ar: &[f64], ma: &[f64], sar: &[f64], sma: &[f64], period: usize) -> (Lags, Lags) {
    let ar_poly = multiply(&lag_poly(ar, 1, -1.0), &lag_poly(sar, period, -1.0));
    let ma_poly = multiply(&lag_poly(ma, 1, 1.0), &lag_poly(sma, period, 1.0));
    (nonzero_lags(&ar_poly, -1.0), nonzero_lags(&ma_poly, 1.0))
}

/// Coefficients `c` with `(1−B)^d (1−B^S)^D = 1 − Σ c_k B^k`.
fn integration_lags(order: &SarimaOrder) -> Lags {
    let mut p = vec![1.0];
    for _ in 0..order.diff {
        p = multiply(&p, &[1.0, -1.0]);
    }
    for _ in 0..order.seasonal_diff {
        p = multiply(&p, &lag_poly(&[1.0], order.period, -1.0));
    }
    nonzero_lags(&p, -1.0)
}

pub fn difference(y: &[f64], order: &SarimaOrder) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..order.seasonal_diff {
        w = (order.period..w.len()).map(|t| w[t] - w[t - order.period]).collect();
    }
    for _ in 0..order.diff {
        w = (1..w.len()).map(|t| w[t] - w[t - 1]).collect();
    }
    w
}

/// Conditional residuals: zero before `start`, pre-sample innovations zero.
fn residuals(w: &[f64], mu: f64, ar: &Lags, ma: &Lags, start: usize) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut pred = 0.0;
        for &(l, c) in ar {
            pred += c * (w[t - l] - mu);
        }
        for &(l, c) in ma {
            if t >= l + start {
                pred += c * e[t - l];
            }
        }
        e[t] = w[t] - mu - pred;
    }
    e
}

struct Unpacked {
    ar: Vec<f64>,
    ma: Vec<f64>,
    sar: Vec<f64>,
    sma: Vec<f64>,
    mu: f64,
}

fn unpack(order: &SarimaOrder, x: &[f64]) -> Unpacked {
    let (p, q, sp, sq) = (order.ar, order.ma, order.seasonal_ar, order.seasonal_ma);
    let neg = |v: Vec<f64>| v.into_iter().map(|c| -c).collect::<Vec<_>>();
    Unpacked {
        ar: pacf_to_coeffs(&x[..p]),
        ma: neg(pacf_to_coeffs(&x[p..p + q])),
        sar: pacf_to_coeffs(&x[p + q..p + q + sp]),
        sma: neg(pacf_to_coeffs(&x[p + q + sp..p + q + sp + sq])),
        mu: if order.has_intercept() { x[p + q + sp + sq] } else { 0.0 },
    }
}

/// Fits one order to a single contiguous series.
pub fn sarima_fit(y: &[f64], order: SarimaOrder) -> Result<SarimaFit> {
    sarima_fit_segments(&[y], order)
}

/// Fits one order to several disjoint contiguous segments of the same
/// process; each segment is differenced and conditioned on separately.
pub fn sarima_fit_segments(segments: &[&[f64]], order: SarimaOrder) -> Result<SarimaFit> {
    order.validate()?;
    let start = order.max_ar_lag();
    let diffed: Vec<Vec<f64>> =
        segments.iter().filter(|s| s.len() >= order.min_length()).map(|s| difference(s, &order)).collect();
    let n_obs: usize = diffed.iter().map(|w| w.len() - start).sum();
    let available = segments.iter().map(|s| s.len()).max().unwrap_or(0);
    if diffed.is_empty() || n_obs <= 10 {
        return Err(Error::InsufficientData {
            what: "observations for this SARIMA order",
            required: order.min_length() + 1,
            available,
        });
    }
    if segments.iter().flat_map(|s| s.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Input("series contains non-finite values".into()));
    }

    let all: Vec<f64> = diffed.iter().flat_map(|w| w[start..].iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let sd = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();

    let css = |x: &[f64]| -> f64 {
        let u = unpack(&order, x);
        let (ar, ma) = expand(&u.ar, &u.ma, &u.sar, &u.sma, order.period);
        diffed.iter().map(|w| residuals(w, u.mu, &ar, &ma, start)[start..].iter().map(|e| e * e).sum::<f64>()).sum()
    };

    let n_arma = order.arma_terms();
    let (x, best_css) = if n_arma == 0 {
        // Without ARMA terms the conditional likelihood is maximized by the mean.
        let x = if order.has_intercept() { vec![mean] } else { vec![] };
        let v = css(&x);
        (x, v)
    } else {
        let mut x0 = vec![0.0; n_arma];
        let mut steps = vec![1.0; n_arma];
        if order.has_intercept() {
            x0.push(mean);
            steps.push((0.2 * sd).max(1e-3));
        }
        let opts = NelderMeadOptions { max_evals: 4000 + 1500 * x0.len(), ..Default::default() };
        let r = nelder_mead::minimize(css, &x0, &steps, &opts);
        if !r.converged || !r.fx.is_finite() {
            return Err(Error::FitFailure {
                message: format!("Nelder-Mead did not converge for {order} after {} evaluations", r.evals),
                best_objective: r.fx.is_finite().then_some(r.fx),
            });
        }
        (r.x, r.fx)
    };

    let sigma2 = best_css / n_obs as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::FitFailure {
            message: format!("{order} leaves zero residual variance"),
            best_objective: Some(best_css),
        });
    }
    let n = n_obs as f64;
    let loglik = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let aic = 2.0 * order.n_params() as f64 - 2.0 * loglik;
    let u = unpack(&order, &x);
    Ok(SarimaFit {
        order,
        ar_coeffs: u.ar,
        ma_coeffs: u.ma,
        seasonal_ar_coeffs: u.sar,
        seasonal_ma_coeffs: u.sma,
        intercept: u.mu,
        sigma2,
        loglik,
        aic,
        n_obs,
    })
}

impl SarimaFit {
    /// Iterated conditional expectations with future innovations at zero,
    /// integrated back to the scale of `history`.
    pub fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Err(Error::Input("forecast horizon must be ≥ 1".into()));
        }
        let o = &self.order;
        if history.len() <= o.diff_loss() {
            return Err(Error::InsufficientData {
                what: "history for differencing",
                required: o.diff_loss() + 1,
                available: history.len(),
            });
        }
        let (ar, ma) =
            expand(&self.ar_coeffs, &self.ma_coeffs, &self.seasonal_ar_coeffs, &self.seasonal_ma_coeffs, o.period);
        let mu = self.intercept;
        let mut w = difference(history, o);
        let start = o.max_ar_lag().min(w.len());
        let mut e = residuals(&w, mu, &ar, &ma, start);
        let n = w.len();
        for t in n..n + horizon {
            let mut v = mu;
            for &(l, c) in &ar {
                v += c * if t >= l { w[t - l] - mu } else { 0.0 };
            }
            for &(l, c) in &ma {
                if t >= l {
                    v += c * e[t - l];
                }
            }
            w.push(v);
            e.push(0.0);
        }
        let integ = integration_lags(o);
        let mut y = history.to_vec();
        for h in 0..horizon {
            let t = y.len();
            let v = w[n + h] + integ.iter().map(|&(l, c)| c * y[t - l]).sum::<f64>();
            y.push(v);
        }
        Ok(y.split_off(history.len()))
    }

    /// Coefficient lists of the four factor polynomials, as
    /// `1 − Σ aᵢzⁱ`-style root-check inputs: (AR, MA negated, SAR, SMA negated).
    pub fn factor_polynomials(&self) -> [Vec<f64>; 4] {
        let neg = |v: &[f64]| v.iter().map(|c| -c).collect::<Vec<_>>();
        [self.ar_coeffs.clone(), neg(&self.ma_coeffs), self.seasonal_ar_coeffs.clone(), neg(&self.seasonal_ma_coeffs)]
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("bad SARIMA document: {e}")))
    }
}

pub fn sarima_forecast(fit: &SarimaFit, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    fit.forecast(history, horizon)
}

/// Lag in `[2, max_period]` at the highest local ACF peak, or 0 when that
/// peak does not clear the `2/√n` band. Restricting to local peaks keeps the
/// short-lag decay of smooth series from masquerading as a period.
pub fn detect_seasonal_period(y: &[f64], max_period: usize) -> Result<usize> {
    if y.len() < 4 * max_period || max_period < 2 {
        return Err(Error::InsufficientData {
            what: "readings for period detection (4 × max period)",
            required: 4 * max_period.max(2),
            available: y.len(),
        });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if y.iter().all(|v| (v - mean).abs() <= 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::DegenerateStatistics("constant series has no autocorrelation".into()));
    }
    let acf: Vec<f64> = (0..=max_period + 1).map(|l| autocorrelation(y, l)).collect();
    let threshold = 2.0 / (y.len() as f64).sqrt();
    let best = (2..=max_period)
        .filter(|&l| acf[l] > acf[l - 1] && acf[l] >= acf[l + 1])
        .max_by(|&a, &b| acf[a].total_cmp(&acf[b]));
    Ok(match best {
        Some(l) if acf[l] > threshold => l,
        _ => 0,
    })
}

/// Seasonal then regular differencing orders: one seasonal difference when
/// the ACF at `period` exceeds 0.5; regular differences while lag-1 ACF
/// stays above 0.9. Total order never exceeds 2.
pub fn choose_differencing(y: &[f64], period: usize) -> (usize, usize) {
    let mut seasonal = 0;
    let mut w = y.to_vec();
    if period >= 2 && y.len() > 3 * period && autocorrelation(y, period) > 0.5 {
        seasonal = 1;
        w = (period..w.len()).map(|t| w[t] - w[t - period]).collect();
    }
    let mut regular = 0;
    while regular + seasonal < 2 && w.len() > 3 && autocorrelation(&w, 1) > 0.9 {
        w = (1..w.len()).map(|t| w[t] - w[t - 1]).collect();
        regular += 1;
    }
    (regular, seasonal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridBounds {
    pub ar_max: usize,
    pub ma_max: usize,
    pub seasonal_ar_max: usize,
    pub seasonal_ma_max: usize,
}

impl Default for GridBounds {
    fn default() -> Self {
        Self { ar_max: 3, ma_max: 3, seasonal_ar_max: 1, seasonal_ma_max: 1 }
    }
}

/// Fits every order in the grid and keeps the minimum AIC. AIC ties within
/// 1e-12 go to fewer parameters, then lexicographically smaller order.
pub fn sarima_grid_search(
    segments: &[&[f64]],
    bounds: GridBounds,
    diff: usize,
    seasonal_diff: usize,
    period: usize,
) -> Result<SarimaFit> {
    let seasonal = period >= 2;
    let (sp_max, sq_max) = if seasonal { (bounds.seasonal_ar_max, bounds.seasonal_ma_max) } else { (0, 0) };
    let period = period.max(1);
    let mut best: Option<SarimaFit> = None;
    let mut failures = Vec::new();
    for p in 0..=bounds.ar_max {
        for q in 0..=bounds.ma_max {
            for sp in 0..=sp_max {
                for sq in 0..=sq_max {
                    let order = match SarimaOrder::new((p, diff, q), (sp, seasonal_diff, sq), period) {
                        Ok(o) => o,
                        Err(e) => {
                            failures.push(e.to_string());
                            continue;
                        }
                    };
                    match sarima_fit_segments(segments, order) {
                        Ok(fit) => {
                            log::debug!("SARIMA {order}: AIC {:.4}", fit.aic);
                            if best.as_ref().is_none_or(|b| better(&fit, b)) {
                                best = Some(fit);
                            }
                        }
                        Err(e) => {
                            log::debug!("SARIMA {order} failed: {e}");
                            failures.push(format!("{order}: {e}"));
                        }
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::FitFailure {
        message: format!("every grid order failed: {}", failures.join("; ")),
        best_objective: None,
    })
}

fn better(a: &SarimaFit, b: &SarimaFit) -> bool {
    if (a.aic - b.aic).abs() > 1e-12 {
        return a.aic < b.aic;
    }
    let (ka, kb) = (a.order.n_params(), b.order.n_params());
    if ka != kb {
        return ka < kb;
    }
    a.order.lex_key() < b.order.lex_key()
}

/// Period detection, differencing heuristic and grid search in one call;
/// detection runs on the longest segment.
pub fn auto_sarima(segments: &[&[f64]], max_period: usize, bounds: GridBounds) -> Result<SarimaFit> {
    let longest = segments.iter().max_by_key(|s| s.len()).ok_or_else(|| Error::Input("no training segments".into()))?;
    let max_period = max_period.min(longest.len() / 4);
    let period = if max_period >= 2 { detect_seasonal_period(longest, max_period)? } else { 0 };
    let (d, sd) = choose_differencing(longest, period);
    log::info!("SARIMA search: period {period}, d={d}, D={sd}");
    sarima_grid_search(segments, bounds, d, sd, period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fit_with(order: SarimaOrder, ar: Vec<f64>, intercept: f64) -> SarimaFit {
        SarimaFit {
            order,
            ar_coeffs: ar,
            ma_coeffs: vec![0.0; order.ma],
            seasonal_ar_coeffs: vec![0.0; order.seasonal_ar],
            seasonal_ma_coeffs: vec![0.0; order.seasonal_ma],
            intercept,
            sigma2: 1.0,
            loglik: 0.0,
            aic: 0.0,
            n_obs: 0,
        }
    }

    #[test]
    fn constant_mean_forecast() {
        let f = fit_with(SarimaOrder::arima(0, 0, 0).unwrap(), vec![], 0.4);
        assert_eq!(f.forecast(&[0.1, 0.9, 0.3], 4).unwrap(), vec![0.4; 4]);
    }

    #[test]
    fn ar1_forecast_decays_geometrically() {
        let f = fit_with(SarimaOrder::arima(1, 0, 0).unwrap(), vec![0.6], 0.0);
        let out = f.forecast(&[0.3, -0.2, 2.0], 3).unwrap();
        for (h, v) in out.iter().enumerate() {
            assert!((v - 0.6f64.powi(h as i32 + 1) * 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn random_walk_repeats_last_value() {
        let f = fit_with(SarimaOrder::arima(0, 1, 0).unwrap(), vec![], 0.0);
        assert_eq!(f.forecast(&[1.0, 3.0, 2.5], 3).unwrap(), vec![2.5; 3]);
    }

    #[test]
    fn seasonal_difference_repeats_last_cycle() {
        let o = SarimaOrder::new((0, 0, 0), (0, 1, 0), 3).unwrap();
        let f = fit_with(o, vec![], 0.0);
        let out = f.forecast(&[9.0, 1.0, 2.0, 3.0], 4).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let f = fit_with(SarimaOrder::arima(0, 0, 0).unwrap(), vec![], 0.0);
        assert!(matches!(f.forecast(&[1.0], 0), Err(Error::Input(_))));
    }

    #[test]
    fn order_validation() {
        assert!(SarimaOrder::new((0, 2, 0), (0, 1, 0), 12).is_err());
        assert!(SarimaOrder::new((0, 0, 0), (1, 0, 0), 1).is_err());
        assert_eq!(SarimaOrder::new((1, 0, 1), (1, 0, 0), 12).unwrap().n_params(), 5);
    }

    #[test]
    fn short_series_is_insufficient() {
        let o = SarimaOrder::new((1, 0, 0), (1, 0, 0), 12).unwrap();
        assert!(matches!(sarima_fit(&[1.0; 20], o), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn expanded_polynomial_matches_product() {
        let (ar, ma) = expand(&[0.5], &[0.3], &[0.2], &[0.4], 4);
        // (1 − 0.5B)(1 − 0.2B⁴) = 1 − 0.5B − 0.2B⁴ + 0.1B⁵
        assert_eq!(ar, vec![(1, 0.5), (4, 0.2), (5, -0.1)]);
        // (1 + 0.3B)(1 + 0.4B⁴) = 1 + 0.3B + 0.4B⁴ + 0.12B⁵
        assert_eq!(ma.len(), 3);
        assert!((ma[2].1 - 0.12).abs() < 1e-15);
    }

    #[test]
    fn sine_period_is_detected() {
        let y: Vec<f64> = (0..200).map(|t| (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin()).collect();
        assert_eq!(detect_seasonal_period(&y, 48).unwrap(), 24);
        assert!(matches!(detect_seasonal_period(&[3.0; 100], 10), Err(Error::DegenerateStatistics(_))));
        assert!(matches!(detect_seasonal_period(&y, 60), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn json_round_trip() {
        let f = fit_with(SarimaOrder::new((1, 0, 0), (0, 1, 1), 7).unwrap(), vec![0.25], 0.0);
        let back = SarimaFit::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, back);
    }

    proptest! {
        #[test]
        fn pacf_transform_round_trips(raw in prop::collection::vec(-3.0f64..3.0, 1..5)) {
            let c = pacf_to_coeffs(&raw);
            let back = coeffs_to_pacf(&c);
            for (a, b) in raw.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-6, "{raw:?} -> {back:?}");
            }
        }
    }
}
