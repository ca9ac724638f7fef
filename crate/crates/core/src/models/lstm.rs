use super::layers::Dense;
use super::{check_batch, check_dims, ForecastModel, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Init, ParamId, ParamStore, Var};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub layers: usize,
    pub hidden: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self { layers: 3, hidden: 32 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    input: ParamId,
    recurrent: ParamId,
    bias: ParamId,
}

/// Stacked LSTM; the top layer's final hidden state feeds a dense head.
/// Gate blocks are ordered input, forget, candidate, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    cfg: LstmConfig,
    lookback: usize,
    horizon: usize,
    store: ParamStore,
    cells: Vec<Cell>,
    head: Dense,
}

impl Lstm {
    pub fn new(cfg: LstmConfig, lookback: usize, horizon: usize) -> Result<Self> {
        check_dims(lookback, horizon)?;
        if cfg.layers == 0 || cfg.hidden == 0 {
            return Err(Error::Config("LSTM needs ≥ 1 layer and hidden size ≥ 1".into()));
        }
        let h = cfg.hidden;
        let mut store = ParamStore::new();
        let cells = (0..cfg.layers)
            .map(|l| {
                let input_width = if l == 0 { 1 } else { h };
                Cell {
                    input: store.add(
                        format!("lstm{l}.input"),
                        &[input_width, 4 * h],
                        Init::Glorot { fan_in: input_width, fan_out: 4 * h },
                    ),
                    recurrent: store.add(
                        format!("lstm{l}.recurrent"),
                        &[h, 4 * h],
                        Init::Glorot { fan_in: h, fan_out: 4 * h },
                    ),
                    bias: store.add(
                        format!("lstm{l}.bias"),
                        &[4 * h],
                        Init::ConstantSlice { start: h, len: h, value: 1.0 },
                    ),
                }
            })
            .collect();
        let head = Dense::new(&mut store, "head", h, horizon);
        Ok(Self { cfg, lookback, horizon, store, cells, head })
    }
}

impl ForecastModel for Lstm {
    super::model_common!(ModelKind::Lstm);

    fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let b = check_batch(g, batch, self.lookback)?;
        let (h, steps) = (self.cfg.hidden, self.lookback);
        let st = &self.store;
        let mut seq = g.reshape(batch, &[b, steps, 1])?;
        let mut last = None;
        for (l, cell) in self.cells.iter().enumerate() {
            let wx = g.param(st, cell.input);
            let wh = g.param(st, cell.recurrent);
            let bias = g.param(st, cell.bias);
            // Input contributions for every step in one product: [B, L, 4h].
            let pre = g.linear(seq, wx, Some(bias))?;
            let mut hs = Vec::with_capacity(steps);
            let mut state: Option<Var> = None;
            for t in 0..steps {
                let z = g.slice(pre, 1, t, 1)?;
                let mut z = g.reshape(z, &[b, 4 * h])?;
                if let Some(s) = state {
                    let hp = g.slice(s, 1, 0, h)?;
                    let r = g.matmul(hp, wh)?;
                    z = g.add(z, r)?;
                }
                let s = g.lstm_cell(z, state)?;
                state = Some(s);
                if l + 1 < self.cells.len() {
                    let hidden = g.slice(s, 1, 0, h)?;
                    hs.push(g.reshape(hidden, &[b, 1, h])?);
                }
            }
            let s = state.expect("lookback ≥ 1");
            last = Some(g.slice(s, 1, 0, h)?);
            if l + 1 < self.cells.len() {
                seq = g.concat(&hs, 1)?;
            }
        }
        let top = last.expect("at least one layer");
        self.head.apply(g, st, top)
    }
}
