//! Neural forecasters behind one contract: a normalized `[B, L]` lookback
//! batch maps to a `[B, H]` horizon batch.

pub mod itransformer;
pub mod layers;
pub mod lstm;
pub mod patchtst;
pub mod tcn;
pub mod timesnet;
pub mod tsmixer;

pub use itransformer::{ITransformer, ITransformerConfig};
pub use lstm::{Lstm, LstmConfig};
pub use patchtst::{PatchTst, PatchTstConfig};
pub use tcn::{Tcn, TcnConfig};
pub use timesnet::{TimesNet, TimesNetConfig};
pub use tsmixer::{TsMixer, TsMixerConfig};

use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

/// Every forecaster the benchmark knows, classical ones and baselines included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Sarima,
    Prophet,
    Lstm,
    Tcn,
    TsMixer,
    TimesNet,
    PatchTst,
    ITransformer,
    /// Repeats the last observed value.
    Naive,
    /// Repeats the training-span mean.
    Mean,
}

impl ModelKind {
    /// The eight models selected by `all`.
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Sarima,
        ModelKind::Prophet,
        ModelKind::Lstm,
        ModelKind::Tcn,
        ModelKind::TsMixer,
        ModelKind::TimesNet,
        ModelKind::PatchTst,
        ModelKind::ITransformer,
    ];

    pub const NEURAL: [ModelKind; 6] = [
        ModelKind::Lstm,
        ModelKind::Tcn,
        ModelKind::TsMixer,
        ModelKind::TimesNet,
        ModelKind::PatchTst,
        ModelKind::ITransformer,
    ];

    const EVERY: [ModelKind; 10] = [
        ModelKind::Sarima,
        ModelKind::Prophet,
        ModelKind::Lstm,
        ModelKind::Tcn,
        ModelKind::TsMixer,
        ModelKind::TimesNet,
        ModelKind::PatchTst,
        ModelKind::ITransformer,
        ModelKind::Naive,
        ModelKind::Mean,
    ];

    /// Lower-case identifier used on the command line and in file names.
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Sarima => "sarima",
            ModelKind::Prophet => "prophet",
            ModelKind::Lstm => "lstm",
            ModelKind::Tcn => "tcn",
            ModelKind::TsMixer => "tsmixer",
            ModelKind::TimesNet => "timesnet",
            ModelKind::PatchTst => "patchtst",
            ModelKind::ITransformer => "itransformer",
            ModelKind::Naive => "naive",
            ModelKind::Mean => "mean",
        }
    }

    /// Column label in reports.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Sarima => "SARIMA",
            ModelKind::Prophet => "Prophet",
            ModelKind::Lstm => "LSTM",
            ModelKind::Tcn => "TCN",
            ModelKind::TsMixer => "TSMixerx",
            ModelKind::TimesNet => "TimesNet",
            ModelKind::PatchTst => "PatchTST",
            ModelKind::ITransformer => "iTransformer",
            ModelKind::Naive => "Naive",
            ModelKind::Mean => "Mean",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::EVERY.into_iter().find(|k| k.label() == label)
    }

    pub fn is_neural(self) -> bool {
        Self::NEURAL.contains(&self)
    }

    pub fn valid_names() -> String {
        let mut names: Vec<&str> = Self::EVERY.iter().map(|k| k.id()).collect();
        names.push("all");
        names.join(", ")
    }

    /// Parses a comma-separated list; `all` expands to [`ModelKind::ALL`].
    pub fn parse_list(s: &str) -> Result<Vec<ModelKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Self::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config(format!("no models selected; valid names: {}", Self::valid_names())));
        }
        let mut seen = Vec::new();
        out.retain(|k| {
            let fresh = !seen.contains(k);
            seen.push(*k);
            fresh
        });
        Ok(out)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::EVERY
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}; valid names: {}", Self::valid_names())))
    }
}

/// Shared contract of the neural forecasters.
///
/// Parameter order is fixed at construction; optimizer state and checkpoints
/// rely on it.
pub trait ForecastModel: Send + Sync + fmt::Debug {
    fn kind(&self) -> ModelKind;
    fn lookback(&self) -> usize;
    fn horizon(&self) -> usize;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    /// Records the forward pass of a `[B, L]` batch on `g`, returning `[B, H]`.
    fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var>;

    /// Architecture hyperparameters; hashed into the config digest.
    fn config_json(&self) -> serde_json::Value;

    fn box_clone(&self) -> Box<dyn ForecastModel>;

    /// Re-initializes every parameter deterministically from `seed`.
    fn reset(&mut self, seed: u64) {
        self.params_mut().reset(seed);
    }

    fn config_digest(&self) -> String {
        let doc = serde_json::json!({
            "model": self.kind().id(),
            "lookback": self.lookback(),
            "horizon": self.horizon(),
            "config": self.config_json(),
        });
        crate::config_digest(&doc)
    }

    /// Forecasts for row-major `[rows, L]` inputs, returned as `[rows, H]`.
    fn predict(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let l = self.lookback();
        if inputs.is_empty() || !inputs.len().is_multiple_of(l) {
            return Err(Error::dim(format!("{} inputs do not form rows of length {l}", inputs.len())));
        }
        let mut out = Vec::with_capacity(inputs.len() / l * self.horizon());
        for chunk in inputs.chunks(256 * l) {
            let mut g = Graph::new();
            let x = g.constant(Tensor::new(&[chunk.len() / l, l], chunk.to_vec())?);
            let y = self.forward(&mut g, x)?;
            out.extend_from_slice(g.value(y).data());
        }
        Ok(out)
    }
}

impl Clone for Box<dyn ForecastModel> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Checks a `[B, L]` batch against a model's lookback.
pub(crate) fn check_batch(g: &Graph, batch: Var, lookback: usize) -> Result<usize> {
    match g.shape(batch) {
        [b, l] if *l == lookback => Ok(*b),
        s => Err(Error::dim(format!("expected a [B, {lookback}] batch, got {s:?}"))),
    }
}

/// Builds a neural model with its default architecture, initialized from `seed`.
pub fn build_model(kind: ModelKind, lookback: usize, horizon: usize, seed: u64) -> Result<Box<dyn ForecastModel>> {
    let mut m: Box<dyn ForecastModel> = match kind {
        ModelKind::Lstm => Box::new(Lstm::new(LstmConfig::default(), lookback, horizon)?),
        ModelKind::Tcn => Box::new(Tcn::new(TcnConfig::default(), lookback, horizon)?),
        ModelKind::TsMixer => Box::new(TsMixer::new(TsMixerConfig::default(), lookback, horizon)?),
        ModelKind::TimesNet => Box::new(TimesNet::new(TimesNetConfig::default(), lookback, horizon)?),
        ModelKind::PatchTst => Box::new(PatchTst::new(PatchTstConfig::default(), lookback, horizon)?),
        ModelKind::ITransformer => Box::new(ITransformer::new(ITransformerConfig::default(), lookback, horizon)?),
        other => return Err(Error::Config(format!("{other} is not a neural model"))),
    };
    m.reset(seed);
    Ok(m)
}

pub(crate) fn check_dims(lookback: usize, horizon: usize) -> Result<()> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::Config(format!("lookback and horizon must be ≥ 1 (got {lookback}, {horizon})")));
    }
    Ok(())
}

// ---- checkpoints ----------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"HRBCKPT1";

/// Writes `magic, name, config digest, parameter count, f64 LE values`.
/// Strings are `u32` LE length-prefixed UTF-8; the count is `u64` LE.
pub fn write_checkpoint(model: &dyn ForecastModel, mut w: impl Write) -> std::io::Result<()> {
    let values = model.params().flat_values();
    w.write_all(CHECKPOINT_MAGIC)?;
    for s in [model.kind().id().to_string(), model.config_digest()] {
        w.write_all(&(s.len() as u32).to_le_bytes())?;
        w.write_all(s.as_bytes())?;
    }
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Loads parameters into `model` after checking name, digest and count.
pub fn read_checkpoint(model: &mut dyn ForecastModel, mut r: impl Read) -> Result<()> {
    let bad = |m: String| Error::Input(format!("invalid checkpoint: {m}"));
    let io = |e: std::io::Error| bad(e.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let read_string = |r: &mut dyn Read| -> Result<String> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(io)?;
        let len = u32::from_le_bytes(len) as usize;
        if len > 4096 {
            return Err(bad(format!("string length {len}")));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(io)?;
        String::from_utf8(buf).map_err(|e| bad(e.to_string()))
    };
    let name = read_string(&mut r)?;
    let digest = read_string(&mut r)?;
    if name != model.kind().id() {
        return Err(bad(format!("written by {name}, loading into {}", model.kind())));
    }
    if digest != model.config_digest() {
        return Err(bad("architecture digest differs".into()));
    }
    let mut count = [0u8; 8];
    r.read_exact(&mut count).map_err(io)?;
    let count = u64::from_le_bytes(count) as usize;
    if count != model.params().scalar_count() {
        return Err(bad(format!("{count} values for {} parameters", model.params().scalar_count())));
    }
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(io)?;
        values.push(f64::from_le_bytes(buf));
    }
    model.params_mut().load_flat(&values)
}

pub fn save_checkpoint(model: &dyn ForecastModel, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(model, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(model: &mut dyn ForecastModel, path: &Path) -> Result<()> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(model, std::io::BufReader::new(f))
}

/// Boilerplate shared by every model struct holding `cfg`, `store`,
/// `lookback` and `horizon`.
macro_rules! model_common {
    ($kind:expr) => {
        fn kind(&self) -> $crate::models::ModelKind {
            $kind
        }
        fn lookback(&self) -> usize {
            self.lookback
        }
        fn horizon(&self) -> usize {
            self.horizon
        }
        fn params(&self) -> &$crate::tensor::ParamStore {
            &self.store
        }
        fn params_mut(&mut self) -> &mut $crate::tensor::ParamStore {
            &mut self.store
        }
        fn config_json(&self) -> serde_json::Value {
            serde_json::to_value(&self.cfg).expect("config serializes")
        }
        fn box_clone(&self) -> Box<dyn $crate::models::ForecastModel> {
            Box::new(self.clone())
        }
    };
}
pub(crate) use model_common;
