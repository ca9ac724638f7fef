use super::layers::{Dense, EncoderLayer, LayerNorm};
use super::{check_batch, check_dims, ForecastModel, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

/// Most derived channels available: raw, first difference, rolling mean.
pub const MAX_VARIATE_CHANNELS: usize = 3;

const ROLLING_HALF_WIDTH: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ITransformerConfig {
    pub blocks: usize,
    pub layers_per_block: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub variate_channels: usize,
}

impl Default for ITransformerConfig {
    fn default() -> Self {
        Self { blocks: 4, layers_per_block: 2, n_heads: 8, d_model: 64, variate_channels: 3 }
    }
}

/// `[L, C·L]` matrix whose product with a window yields the derived channels
/// back to back: the raw series, its first difference with a zero in front,
/// and a centered width-5 rolling mean with edge replication.
pub fn derived_channel_matrix(lookback: usize, channels: usize) -> Vec<f64> {
    let width = channels * lookback;
    let mut m = vec![0.0; lookback * width];
    let mut set = |src: usize, c: usize, t: usize, v: f64| m[src * width + c * lookback + t] += v;
    for t in 0..lookback {
        set(t, 0, t, 1.0);
        if channels > 1 && t > 0 {
            set(t, 1, t, 1.0);
            set(t - 1, 1, t, -1.0);
        }
        if channels > 2 {
            let w = 1.0 / (2 * ROLLING_HALF_WIDTH + 1) as f64;
            for j in 0..=2 * ROLLING_HALF_WIDTH {
                let src = (t + j).saturating_sub(ROLLING_HALF_WIDTH).min(lookback - 1);
                set(src, 2, t, w);
            }
        }
    }
    m
}

/// Inverted transformer: each derived channel's whole window is one token
/// and attention runs across channels. The raw-series token feeds the head.
#[derive(Debug, Clone)]
pub struct ITransformer {
    cfg: ITransformerConfig,
    lookback: usize,
    horizon: usize,
    store: ParamStore,
    channel_matrix: Vec<f64>,
    embed: Dense,
    blocks: Vec<(Vec<EncoderLayer>, LayerNorm)>,
    head: Dense,
}

impl ITransformer {
    pub fn new(cfg: ITransformerConfig, lookback: usize, horizon: usize) -> Result<Self> {
        check_dims(lookback, horizon)?;
        if !(1..=MAX_VARIATE_CHANNELS).contains(&cfg.variate_channels) {
            return Err(Error::Config(format!(
                "variate_channels must be in 1..={MAX_VARIATE_CHANNELS}, got {}",
                cfg.variate_channels
            )));
        }
        if cfg.blocks == 0 || cfg.layers_per_block == 0 {
            return Err(Error::Config("iTransformer needs ≥ 1 block and ≥ 1 layer per block".into()));
        }
        let d = cfg.d_model;
        let mut store = ParamStore::new();
        let embed = Dense::new(&mut store, "embed", lookback, d);
        let blocks = (0..cfg.blocks)
            .map(|i| {
                let layers = (0..cfg.layers_per_block)
                    .map(|j| EncoderLayer::new(&mut store, &format!("block{i}.layer{j}"), d, cfg.n_heads))
                    .collect::<Result<Vec<_>>>()?;
                Ok((layers, LayerNorm::new(&mut store, &format!("block{i}.norm"), d)))
            })
            .collect::<Result<Vec<_>>>()?;
        let head = Dense::new(&mut store, "head", d, horizon);
        let channel_matrix = derived_channel_matrix(lookback, cfg.variate_channels);
        Ok(Self { cfg, lookback, horizon, store, channel_matrix, embed, blocks, head })
    }

    pub fn n_tokens(&self) -> usize {
        self.cfg.variate_channels
    }
}

impl ForecastModel for ITransformer {
    super::model_common!(ModelKind::ITransformer);

    fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let b = check_batch(g, batch, self.lookback)?;
        let (l, c, d) = (self.lookback, self.cfg.variate_channels, self.cfg.d_model);
        let st = &self.store;
        let m = g.constant(Tensor::new(&[l, c * l], self.channel_matrix.clone())?);
        let channels = g.matmul(batch, m)?;
        let channels = g.reshape(channels, &[b, c, l])?;
        let mut x = self.embed.apply(g, st, channels)?;
        for (layers, norm) in &self.blocks {
            for layer in layers {
                x = layer.apply(g, st, x)?;
            }
            x = norm.apply(g, st, x)?;
        }
        let raw = g.slice(x, 1, 0, 1)?;
        let raw = g.reshape(raw, &[b, d])?;
        self.head.apply(g, st, raw)
    }
}
