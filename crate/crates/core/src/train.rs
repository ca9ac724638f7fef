//! Adam training under MSE loss and blocked cross-validation.

use crate::dataset::{
    apply_minmax, fit_fold_normalization, make_windows, FoldSpec, NormalizationMode, NormalizationParams,
    WindowGeometry, WindowedDataset,
};
use crate::error::{Error, Result};
use crate::models::ForecastModel;
use crate::tensor::{Graph, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;

pub const DESK_EPOCHS: usize = 50;
pub const PAPER_EPOCHS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub folds: usize,
    /// Keep every `window_stride`-th training window (by window index).
    pub window_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: DESK_EPOCHS,
            batch_size: 32,
            seed: 0,
            folds: crate::dataset::DEFAULT_FOLDS,
            window_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.folds == 0 || self.window_stride == 0 {
            return bad("epochs, batch_size, folds and window_stride must be ≥ 1".into());
        }
        Ok(())
    }
}

/// Per-parameter Adam moments, aligned with a [`ParamStore`](crate::tensor::ParamStore)'s order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &dyn ForecastModel) -> Self {
        let sizes: Vec<usize> = model.params().tensors().iter().map(Tensor::len).collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    /// One update of every parameter from its accumulated gradient. A
    /// parameter without a gradient is treated as having a zero gradient.
    pub fn step(&mut self, model: &mut dyn ForecastModel, cfg: &TrainConfig) -> Result<()> {
        let store = model.params_mut();
        for (i, t) in store.tensors().iter().enumerate() {
            if let Some(g) = &t.grad {
                if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                    let id = store.ids().nth(i).expect("index in range");
                    return Err(Error::Divergence(format!(
                        "non-finite gradient in parameter {} at element {j}",
                        store.name(id)
                    )));
                }
            }
        }
        self.t += 1;
        for (i, t) in store.tensors_mut().iter_mut().enumerate() {
            let g = t.grad.take().unwrap_or_else(|| vec![0.0; t.len()]);
            adam_update(t.data_mut(), &g, &mut self.m[i], &mut self.v[i], self.t, cfg);
            t.grad = Some(g);
        }
        Ok(())
    }
}

/// Adam update of one parameter slice at step `t` (1-based).
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &TrainConfig) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let mh = m[i] / bc1;
        let vh = v[i] / bc2;
        theta[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub fold: usize,
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// Filled on each fold's final epoch.
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub model: String,
    pub seed: u64,
    pub config_digest: String,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn new(model: &dyn ForecastModel, seed: u64) -> Self {
        Self { model: model.kind().id().to_string(), seed, config_digest: model.config_digest(), records: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,fold,train_loss,val_loss,seconds\n");
        for r in &self.records {
            let val = r.val_loss.map(|v| format!("{v:.10e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{:.10e},{},{:.4}", r.epoch, r.fold, r.train_loss, val, r.seconds);
        }
        s
    }

    pub fn fold_records(&self, fold: usize) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.fold == fold)
    }
}

/// Deterministic visiting order of `n` windows for one epoch.
pub fn epoch_order(n: usize, seed: u64, fold: usize, epoch: usize) -> Vec<usize> {
    let key = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((fold as u64) << 32).wrapping_add(epoch as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Mean squared error of `model` over the listed windows, in batches.
pub fn dataset_loss(model: &dyn ForecastModel, data: &WindowedDataset, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Input("loss over an empty window set".into()));
    }
    let preds = model.predict(&data.gather_inputs(idx))?;
    let targets = data.gather_targets(idx);
    let sse: f64 = preds.iter().zip(&targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sse / preds.len() as f64)
}

/// One minibatch: forward, MSE, backward. Gradients are left in the store.
pub fn batch_gradient(model: &mut dyn ForecastModel, data: &WindowedDataset, idx: &[usize]) -> Result<f64> {
    let (l, h) = (data.lookback(), data.horizon());
    let mut g = Graph::new();
    let x = g.constant(Tensor::new(&[idx.len(), l], data.gather_inputs(idx))?);
    let y = g.constant(Tensor::new(&[idx.len(), h], data.gather_targets(idx))?);
    let pred = model.forward(&mut g, x)?;
    let loss = g.mse_loss(pred, y)?;
    let value = g.value(loss).item();
    g.backward(loss)?;
    let store = model.params_mut();
    store.zero_grad();
    g.accumulate_param_grads(store);
    Ok(value)
}

/// Trains `model` in place on `train_idx` for `cfg.epochs` epochs. On a
/// non-finite loss or gradient the parameters are restored to the last
/// finite state before the error is returned.
pub fn train_fold(
    model: &mut dyn ForecastModel,
    data: &WindowedDataset,
    train_idx: &[usize],
    val_idx: &[usize],
    fold: usize,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<f64> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(Error::InsufficientData { what: "training windows", required: 1, available: 0 });
    }
    let mut adam = AdamState::new(model);
    let mut last_good = model.params().flat_values();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let order = epoch_order(train_idx.len(), cfg.seed, fold, epoch);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let idx: Vec<usize> = chunk.iter().map(|&k| train_idx[k]).collect();
            let step = batch_gradient(model, data, &idx)
                .and_then(|loss| {
                    if loss.is_finite() {
                        Ok(loss)
                    } else {
                        Err(Error::Divergence(format!("loss became {loss} in epoch {epoch}")))
                    }
                })
                .and_then(|loss| adam.step(model, cfg).map(|()| loss));
            match step {
                Ok(loss) => total += loss * idx.len() as f64,
                Err(e) => {
                    model.params_mut().load_flat(&last_good)?;
                    return Err(e);
                }
            }
        }
        last_good = model.params().flat_values();
        let val_loss =
            if epoch == cfg.epochs && !val_idx.is_empty() { Some(dataset_loss(model, data, val_idx)?) } else { None };
        log.records.push(EpochRecord {
            fold,
            epoch,
            train_loss: total / train_idx.len() as f64,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    model.params_mut().zero_grad();
    match log.fold_records(fold).last().and_then(|r| r.val_loss) {
        Some(v) => Ok(v),
        None => Err(Error::Input("fold has no validation windows".into())),
    }
}

/// Normalized windows of one fold.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub fold: FoldSpec,
    pub norm: NormalizationParams,
    pub windows: WindowedDataset,
    /// Training windows after `window_stride` subsampling.
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Normalizes `values` per fold and cuts stride-1 windows.
pub fn prepare_fold(
    values: &[f64],
    fold: &FoldSpec,
    geometry: WindowGeometry,
    mode: NormalizationMode,
    window_stride: usize,
) -> Result<FoldData> {
    let norm = fit_fold_normalization(values, fold, &geometry, mode)?;
    let windows = make_windows(&apply_minmax(values, &norm), geometry)?;
    let train_indices = fold.train_indices.iter().copied().filter(|i| i % window_stride.max(1) == 0).collect();
    Ok(FoldData { fold: fold.clone(), norm, windows, train_indices, val_indices: fold.val_indices.clone().collect() })
}

/// Trained model of one fold with the statistics it was trained under.
#[derive(Debug, Clone)]
pub struct FoldSnapshot {
    pub fold_index: usize,
    pub model: Box<dyn ForecastModel>,
    pub norm: NormalizationParams,
    pub val_loss: f64,
}

#[derive(Debug)]
pub struct CvOutcome {
    pub snapshots: Vec<FoldSnapshot>,
    pub failures: Vec<(usize, Error)>,
    pub log: TrainLog,
}

impl CvOutcome {
    pub fn fold_losses(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.val_loss).collect()
    }

    pub fn mean_val_loss(&self) -> Option<f64> {
        let l = self.fold_losses();
        (!l.is_empty()).then(|| l.iter().sum::<f64>() / l.len() as f64)
    }
}

/// Trains one fresh model per fold, seeded `cfg.seed + fold_index`. A
/// failing fold is recorded and the remaining folds still run.
pub fn cross_validate(
    factory: &dyn Fn(u64) -> Result<Box<dyn ForecastModel>>,
    values: &[f64],
    folds: &[FoldSpec],
    geometry: WindowGeometry,
    mode: NormalizationMode,
    cfg: &TrainConfig,
) -> Result<CvOutcome> {
    cfg.validate()?;
    let probe = factory(cfg.seed)?;
    let mut log = TrainLog::new(probe.as_ref(), cfg.seed);
    let mut snapshots = Vec::new();
    let mut failures = Vec::new();
    for fold in folds {
        let seed = cfg.seed + fold.fold_index as u64;
        let mut run = || -> Result<FoldSnapshot> {
            let data = prepare_fold(values, fold, geometry, mode, cfg.window_stride)?;
            let mut model = factory(seed)?;
            let fold_cfg = TrainConfig { seed, ..cfg.clone() };
            let val_loss = train_fold(
                model.as_mut(),
                &data.windows,
                &data.train_indices,
                &data.val_indices,
                fold.fold_index,
                &fold_cfg,
                &mut log,
            )?;
            Ok(FoldSnapshot { fold_index: fold.fold_index, model, norm: data.norm, val_loss })
        };
        match run() {
            Ok(s) => snapshots.push(s),
            Err(e) => {
                log::warn!("fold {} of {} failed: {e}", fold.fold_index, log.model);
                failures.push((fold.fold_index, e));
            }
        }
    }
    Ok(CvOutcome { snapshots, failures, log })
}
