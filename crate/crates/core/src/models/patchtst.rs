use super::layers::{Dense, EncoderLayer, LayerNorm};
use super::{check_batch, check_dims, ForecastModel, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Init, ParamId, ParamStore, Var};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchTstConfig {
    pub patch_len: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    /// Patch start spacing; `None` means `patch_len` (non-overlapping).
    pub stride: Option<usize>,
}

impl Default for PatchTstConfig {
    fn default() -> Self {
        Self { patch_len: 12, n_layers: 6, n_heads: 8, d_model: 64, stride: None }
    }
}

impl PatchTstConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.patch_len)
    }

    /// Patch count for a lookback; the window is right-padded so the last
    /// patch is complete.
    pub fn n_patches(&self, lookback: usize) -> usize {
        let s = self.stride();
        (lookback.saturating_sub(self.patch_len)).div_ceil(s) + 1
    }

    fn padded_len(&self, lookback: usize) -> usize {
        (self.n_patches(lookback) - 1) * self.stride() + self.patch_len
    }
}

/// Initial gain of the norm feeding the head; keeps the flattened head
/// input small so early updates stay on the scale of the targets.
const HEAD_GAIN: f64 = 0.1;

/// Patches embedded as tokens, learned positional embeddings, a pre-norm
/// encoder stack and a linear head on the flattened token outputs.
#[derive(Debug, Clone)]
pub struct PatchTst {
    cfg: PatchTstConfig,
    lookback: usize,
    horizon: usize,
    store: ParamStore,
    embed: Dense,
    position: ParamId,
    layers: Vec<EncoderLayer>,
    final_norm: LayerNorm,
    head: Dense,
    gather: Vec<usize>,
}

impl PatchTst {
    pub fn new(cfg: PatchTstConfig, lookback: usize, horizon: usize) -> Result<Self> {
        check_dims(lookback, horizon)?;
        if cfg.patch_len == 0 || cfg.stride() == 0 || cfg.n_layers == 0 {
            return Err(Error::Config("PatchTST patch length, stride and depth must be ≥ 1".into()));
        }
        if lookback < cfg.patch_len {
            return Err(Error::Config(format!(
                "lookback {lookback} is shorter than the patch length {}",
                cfg.patch_len
            )));
        }
        let n = cfg.n_patches(lookback);
        let d = cfg.d_model;
        let mut store = ParamStore::new();
        let embed = Dense::new(&mut store, "patch_embed", cfg.patch_len, d);
        let position = store.add("position", &[n, d], Init::Glorot { fan_in: n, fan_out: d });
        let layers = (0..cfg.n_layers)
            .map(|i| EncoderLayer::new(&mut store, &format!("encoder{i}"), d, cfg.n_heads))
            .collect::<Result<Vec<_>>>()?;
        let final_norm = LayerNorm::with_gain(&mut store, "final_norm", d, HEAD_GAIN);
        let head = Dense::new(&mut store, "head", n * d, horizon);
        // Flattened patch gather over the padded window; padding repeats
        // the last observed value.
        let padded = cfg.padded_len(lookback);
        let (patch_len, stride) = (cfg.patch_len, cfg.stride());
        let gather = (0..n)
            .flat_map(|p| (0..patch_len).map(move |j| p * stride + j))
            .map(|i| i.min(padded - 1).min(lookback - 1))
            .collect();
        Ok(Self { cfg, lookback, horizon, store, embed, position, layers, final_norm, head, gather })
    }

    pub fn n_tokens(&self) -> usize {
        self.cfg.n_patches(self.lookback)
    }
}

impl ForecastModel for PatchTst {
    super::model_common!(ModelKind::PatchTst);

    fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let b = check_batch(g, batch, self.lookback)?;
        let (n, d) = (self.n_tokens(), self.cfg.d_model);
        let st = &self.store;
        let patches = g.index_select(batch, 1, &self.gather)?;
        let patches = g.reshape(patches, &[b, n, self.cfg.patch_len])?;
        let tokens = self.embed.apply(g, st, patches)?;
        let pos = g.param(st, self.position);
        let mut x = g.add_bias(tokens, pos)?;
        for layer in &self.layers {
            x = layer.apply(g, st, x)?;
        }
        let x = self.final_norm.apply(g, st, x)?;
        let flat = g.reshape(x, &[b, n * d])?;
        self.head.apply(g, st, flat)
    }
}
