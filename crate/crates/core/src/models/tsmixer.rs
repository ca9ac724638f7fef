use super::layers::{Dense, LayerNorm};
use super::{check_batch, check_dims, ForecastModel, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsMixerConfig {
    pub mlp_layers: usize,
    /// Width of the feature axis and of every feature-mixing MLP.
    pub max_feature_dim: usize,
}

impl Default for TsMixerConfig {
    fn default() -> Self {
        Self { mlp_layers: 5, max_feature_dim: 16 }
    }
}

/// Initial layer-norm gain in front of each mixing branch, so a fresh
/// branch perturbs the residual stream on the scale of a normalized window.
const BRANCH_GAIN: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
struct MixerLayer {
    time_norm: LayerNorm,
    time_mix: Dense,
    feature_norm: LayerNorm,
    feature_in: Dense,
    feature_out: Dense,
}

/// Mixing layers over the mean-centred `[L, 1]` window: a time-mixing dense map
/// across the L axis and a feature MLP `1 → F → 1`, each behind a
/// per-sample layer norm and inside a residual. A linear head maps the
/// mixed window L→H and the window mean is added back.
#[derive(Debug, Clone)]
pub struct TsMixer {
    cfg: TsMixerConfig,
    lookback: usize,
    horizon: usize,
    store: ParamStore,
    layers: Vec<MixerLayer>,
    head: Dense,
    /// `[L, L]` map subtracting the window mean.
    center: Vec<f64>,
    /// `[L, H]` map broadcasting the window mean to every horizon step.
    restore: Vec<f64>,
}

impl TsMixer {
    pub fn new(cfg: TsMixerConfig, lookback: usize, horizon: usize) -> Result<Self> {
        check_dims(lookback, horizon)?;
        if cfg.mlp_layers == 0 || cfg.max_feature_dim == 0 {
            return Err(Error::Config("TSMixer needs ≥ 1 layer and feature width ≥ 1".into()));
        }
        let f = cfg.max_feature_dim;
        let mut store = ParamStore::new();
        let layers = (0..cfg.mlp_layers)
            .map(|i| MixerLayer {
                time_norm: LayerNorm::with_gain(&mut store, &format!("mixer{i}.time_norm"), lookback, BRANCH_GAIN),
                time_mix: Dense::new(&mut store, &format!("mixer{i}.time"), lookback, lookback),
                feature_norm: LayerNorm::with_gain(
                    &mut store,
                    &format!("mixer{i}.feature_norm"),
                    lookback,
                    BRANCH_GAIN,
                ),
                feature_in: Dense::new(&mut store, &format!("mixer{i}.feature_in"), 1, f),
                feature_out: Dense::new(&mut store, &format!("mixer{i}.feature_out"), f, 1),
            })
            .collect();
        let head = Dense::new(&mut store, "head", lookback, horizon);
        let inv = 1.0 / lookback as f64;
        let center = (0..lookback * lookback).map(|k| f64::from(k / lookback == k % lookback) - inv).collect();
        let restore = vec![inv; lookback * horizon];
        Ok(Self { cfg, lookback, horizon, store, layers, head, center, restore })
    }
}

impl ForecastModel for TsMixer {
    super::model_common!(ModelKind::TsMixer);

    fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let b = check_batch(g, batch, self.lookback)?;
        let l = self.lookback;
        let st = &self.store;
        let center = g.constant(Tensor::new(&[l, l], self.center.clone())?);
        let restore = g.constant(Tensor::new(&[l, self.horizon], self.restore.clone())?);
        let level = g.matmul(batch, restore)?;
        let mut x = g.matmul(batch, center)?;
        for layer in &self.layers {
            let y = layer.time_norm.apply(g, st, x)?;
            let y = layer.time_mix.apply(g, st, y)?;
            let y = g.relu(y);
            x = g.add(x, y)?;
            let y = layer.feature_norm.apply(g, st, x)?;
            let y = g.reshape(y, &[b, l, 1])?;
            let y = layer.feature_in.apply(g, st, y)?;
            let y = g.relu(y);
            let y = layer.feature_out.apply(g, st, y)?;
            let y = g.reshape(y, &[b, l])?;
            x = g.add(x, y)?;
        }
        let y = self.head.apply(g, st, x)?;
        g.add(y, level)
    }
}
