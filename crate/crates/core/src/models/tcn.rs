use super::layers::Dense;
use super::{check_batch, check_dims, ForecastModel, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Init, ParamId, ParamStore, Var};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnConfig {
    pub blocks: usize,
    pub kernel: usize,
    pub dilation_base: usize,
    pub channels: usize,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self { blocks: 5, kernel: 3, dilation_base: 2, channels: 32 }
    }
}

impl TcnConfig {
    pub fn dilation(&self, block: usize) -> usize {
        self.dilation_base.pow(block as u32)
    }

    /// Past samples that can reach the last output, counting both
    /// convolutions in every block.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel - 1) * (0..self.blocks).map(|i| self.dilation(i)).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy)]
struct Conv {
    w: ParamId,
    b: ParamId,
}

impl Conv {
    fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, kernel: usize) -> Self {
        Conv {
            w: store.add(
                format!("{name}.weight"),
                &[output, input, kernel],
                Init::Glorot { fan_in: input * kernel, fan_out: output * kernel },
            ),
            b: store.add(format!("{name}.bias"), &[output], Init::Constant(0.0)),
        }
    }

    fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var, dilation: usize) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        g.conv1d(x, w, Some(b), dilation)
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    first: Conv,
    second: Conv,
    skip: Option<Conv>,
}

/// Residual stack of causal dilated convolutions; block `i` dilates by
/// `dilation_base^i`. The head reads the last timestep's channels.
#[derive(Debug, Clone)]
pub struct Tcn {
    cfg: TcnConfig,
    lookback: usize,
    horizon: usize,
    store: ParamStore,
    blocks: Vec<Block>,
    head: Dense,
}

impl Tcn {
    pub fn new(cfg: TcnConfig, lookback: usize, horizon: usize) -> Result<Self> {
        check_dims(lookback, horizon)?;
        if cfg.blocks == 0 || cfg.kernel == 0 || cfg.channels == 0 || cfg.dilation_base == 0 {
            return Err(Error::Config("TCN blocks, kernel, channels and dilation base must be ≥ 1".into()));
        }
        if cfg.receptive_field() < lookback {
            log::warn!("TCN receptive field {} is shorter than the lookback {lookback}", cfg.receptive_field());
        }
        let mut store = ParamStore::new();
        let c = cfg.channels;
        let blocks = (0..cfg.blocks)
            .map(|i| {
                let input = if i == 0 { 1 } else { c };
                Block {
                    first: Conv::new(&mut store, &format!("block{i}.conv1"), input, c, cfg.kernel),
                    second: Conv::new(&mut store, &format!("block{i}.conv2"), c, c, cfg.kernel),
                    skip: (input != c).then(|| Conv::new(&mut store, &format!("block{i}.skip"), input, c, 1)),
                }
            })
            .collect();
        let head = Dense::new(&mut store, "head", c, horizon);
        Ok(Self { cfg, lookback, horizon, store, blocks, head })
    }
}

impl ForecastModel for Tcn {
    super::model_common!(ModelKind::Tcn);

    fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let b = check_batch(g, batch, self.lookback)?;
        let st = &self.store;
        let mut x = g.reshape(batch, &[b, 1, self.lookback])?;
        for (i, block) in self.blocks.iter().enumerate() {
            let d = self.cfg.dilation(i);
            let y = block.first.apply(g, st, x, d)?;
            let y = g.relu(y);
            let y = block.second.apply(g, st, y, d)?;
            let y = g.relu(y);
            let skip = match &block.skip {
                Some(p) => p.apply(g, st, x, 1)?,
                None => x,
            };
            x = g.add(y, skip)?;
        }
        let last = g.slice(x, 2, self.lookback - 1, 1)?;
        let last = g.reshape(last, &[b, self.cfg.channels])?;
        self.head.apply(g, st, last)
    }
}
