//! Statistical baselines: seasonal ARIMA and a Prophet-style decomposition.

pub mod nelder_mead;
pub mod prophet;
pub mod sarima;

pub use prophet::{dominant_periods, prophet_fit, prophet_fit_at, prophet_forecast, ProphetConfig, ProphetFit};
pub use sarima::{
    auto_sarima, detect_seasonal_period, sarima_fit, sarima_fit_segments, sarima_forecast, sarima_grid_search,
    GridBounds, SarimaFit, SarimaOrder,
};
