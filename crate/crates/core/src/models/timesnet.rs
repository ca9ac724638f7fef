use super::layers::{Dense, LayerNorm};
use super::{check_batch, check_dims, ForecastModel, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{rfft_magnitudes, Graph, Init, ParamId, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Tag of the `[B, 1, k]` branch aggregation weights.
pub const BRANCH_WEIGHT_TAG: &str = "timesnet.branch_weights";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimesNetConfig {
    pub fft_blocks: usize,
    pub conv_blocks: usize,
    pub top_k_periods: usize,
    /// Channel width of the embedded sequence and of every 2-D convolution.
    pub d_model: usize,
}

impl Default for TimesNetConfig {
    fn default() -> Self {
        Self { fft_blocks: 1, conv_blocks: 4, top_k_periods: 3, d_model: 8 }
    }
}

/// Dominant periods of one window with their softmax branch weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSelection {
    pub bins: Vec<usize>,
    pub periods: Vec<usize>,
    pub amplitudes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Picks the `k` strongest non-DC bins of `window`; period is
/// `round(len / bin)`. Ties go to the lower bin. `k` is clamped to the
/// number of non-DC bins.
pub fn select_periods(window: &[f64], k: usize) -> Result<PeriodSelection> {
    if k == 0 {
        return Err(Error::Config("top_k_periods must be ≥ 1".into()));
    }
    let mags = rfft_magnitudes(window)?;
    let mut bins: Vec<usize> = (1..mags.len()).collect();
    bins.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    bins.truncate(k);
    let n = window.len() as f64;
    let periods = bins.iter().map(|&f| ((n / f as f64).round() as usize).max(1)).collect();
    let amplitudes: Vec<f64> = bins.iter().map(|&f| mags[f]).collect();
    let top = amplitudes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = amplitudes.iter().map(|a| (a - top).exp()).collect();
    let total: f64 = exp.iter().sum();
    let weights = exp.into_iter().map(|e| e / total).collect();
    Ok(PeriodSelection { bins, periods, amplitudes, weights })
}

#[derive(Debug, Clone, Copy)]
struct Conv2d {
    w: ParamId,
    b: ParamId,
}

/// One FFT block: per-period 2-D convolution branches merged by amplitude
/// softmax, with a residual and layer norm.
#[derive(Debug, Clone)]
struct TimesBlock {
    convs: Vec<Conv2d>,
    norm: LayerNorm,
}

/// Value embedding, a linear extension of the time axis from L to L+H,
/// FFT blocks, then a per-step projection and a dense head to H.
#[derive(Debug, Clone)]
pub struct TimesNet {
    cfg: TimesNetConfig,
    lookback: usize,
    horizon: usize,
    store: ParamStore,
    embed: Dense,
    extend: Dense,
    blocks: Vec<TimesBlock>,
    project: Dense,
    head: Dense,
}

impl TimesNet {
    pub fn new(cfg: TimesNetConfig, lookback: usize, horizon: usize) -> Result<Self> {
        check_dims(lookback, horizon)?;
        if cfg.top_k_periods == 0 || cfg.fft_blocks == 0 || cfg.conv_blocks == 0 || cfg.d_model == 0 {
            return Err(Error::Config("TimesNet block counts, top_k and d_model must be ≥ 1".into()));
        }
        if lookback < 2 {
            return Err(Error::Config("TimesNet needs a lookback of at least 2".into()));
        }
        let d = cfg.d_model;
        let total = lookback + horizon;
        let mut store = ParamStore::new();
        let embed = Dense::new(&mut store, "embed", 1, d);
        let extend = Dense::new(&mut store, "extend", lookback, total);
        let blocks = (0..cfg.fft_blocks)
            .map(|i| TimesBlock {
                convs: (0..cfg.conv_blocks)
                    .map(|j| Conv2d {
                        w: store.add(
                            format!("block{i}.conv{j}.weight"),
                            &[3, 3, d, d],
                            Init::Glorot { fan_in: 9 * d, fan_out: 9 * d },
                        ),
                        b: store.add(format!("block{i}.conv{j}.bias"), &[d], Init::Constant(0.0)),
                    })
                    .collect(),
                norm: LayerNorm::new(&mut store, &format!("block{i}.norm"), d),
            })
            .collect();
        let project = Dense::new(&mut store, "project", d, 1);
        let head = Dense::new(&mut store, "head", total, horizon);
        Ok(Self { cfg, lookback, horizon, store, embed, extend, blocks, project, head })
    }

    fn total_len(&self) -> usize {
        self.lookback + self.horizon
    }

    /// 2-D branch for one period: `[g, T, D] → [g, T, D]`.
    fn branch(&self, g: &mut Graph, block: &TimesBlock, x: Var, period: usize) -> Result<Var> {
        let s = g.shape(x).to_vec();
        let (rows, t, d) = (s[0], s[1], s[2]);
        let padded = t.div_ceil(period) * period;
        let mut y = if padded > t {
            let zeros = g.constant(Tensor::zeros(&[rows, padded - t, d]));
            g.concat(&[x, zeros], 1)?
        } else {
            x
        };
        y = g.reshape(y, &[rows, padded / period, period, d])?;
        for (j, conv) in block.convs.iter().enumerate() {
            let w = g.param(&self.store, conv.w);
            let b = g.param(&self.store, conv.b);
            y = g.conv2d_same(y, w, Some(b))?;
            if j + 1 < block.convs.len() {
                y = g.relu(y);
            }
        }
        let y = g.reshape(y, &[rows, padded, d])?;
        if padded > t {
            g.slice(y, 1, 0, t)
        } else {
            Ok(y)
        }
    }

    /// Applies one block to rows that share a period set.
    fn block_group(&self, g: &mut Graph, block: &TimesBlock, x: Var, sel: &[PeriodSelection]) -> Result<Var> {
        let s = g.shape(x).to_vec();
        let (rows, t, d) = (s[0], s[1], s[2]);
        let k = sel[0].periods.len();
        let mut outs = Vec::with_capacity(k);
        for &p in &sel[0].periods {
            let y = self.branch(g, block, x, p)?;
            outs.push(g.reshape(y, &[rows, 1, t * d])?);
        }
        let stacked = if k == 1 { outs[0] } else { g.concat(&outs, 1)? };
        let weights: Vec<f64> = sel.iter().flat_map(|s| s.weights.iter().copied()).collect();
        let weights = g.constant(Tensor::new(&[rows, 1, k], weights)?);
        g.tag(BRANCH_WEIGHT_TAG, weights);
        let mixed = g.bmm(weights, stacked, false, false)?;
        g.reshape(mixed, &[rows, t, d])
    }
}

impl ForecastModel for TimesNet {
    super::model_common!(ModelKind::TimesNet);

    fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let b = check_batch(g, batch, self.lookback)?;
        let (l, t, d) = (self.lookback, self.total_len(), self.cfg.d_model);
        let st = &self.store;
        let raw = g.value(batch).data().to_vec();
        let selections =
            raw.chunks(l).map(|row| select_periods(row, self.cfg.top_k_periods)).collect::<Result<Vec<_>>>()?;
        // Rows sharing a period set run their branches together.
        let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
        for (i, sel) in selections.iter().enumerate() {
            groups.entry(&sel.periods).or_default().push(i);
        }
        let mut order: Vec<usize> = Vec::with_capacity(b);
        for rows in groups.values() {
            order.extend(rows);
        }
        let mut restore = vec![0; b];
        for (pos, &row) in order.iter().enumerate() {
            restore[row] = pos;
        }

        let x = g.reshape(batch, &[b, l, 1])?;
        let x = self.embed.apply(g, st, x)?;
        let x = g.transpose(x, 1, 2)?;
        let x = self.extend.apply(g, st, x)?;
        let mut x = g.transpose(x, 1, 2)?;
        for block in &self.blocks {
            let mut parts = Vec::with_capacity(groups.len());
            for rows in groups.values() {
                let sub = if groups.len() == 1 { x } else { g.index_select(x, 0, rows)? };
                let sel: Vec<PeriodSelection> = rows.iter().map(|&r| selections[r].clone()).collect();
                parts.push(self.block_group(g, block, sub, &sel)?);
            }
            let merged = if parts.len() == 1 {
                parts[0]
            } else {
                let cat = g.concat(&parts, 0)?;
                g.index_select(cat, 0, &restore)?
            };
            let y = g.add(x, merged)?;
            x = block.norm.apply(g, st, y)?;
        }
        let y = self.project.apply(g, st, x)?;
        let y = g.reshape(y, &[b, t])?;
        debug_assert_eq!(g.shape(x), [b, t, d]);
        self.head.apply(g, st, y)
    }
}
