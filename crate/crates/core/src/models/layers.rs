//! Parameterized building blocks shared by the neural forecasters.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Init, ParamId, ParamStore, Var};

/// Attention weights of every layer are tagged with this name.
pub const ATTENTION_TAG: &str = "attention";

#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    /// Glorot-uniform weights `[input, output]`, zero bias.
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize) -> Self {
        Self::with_bias(store, name, input, output, Init::Constant(0.0))
    }

    pub fn with_bias(store: &mut ParamStore, name: &str, input: usize, output: usize, bias: Init) -> Self {
        let w = store.add(format!("{name}.weight"), &[input, output], Init::Glorot { fan_in: input, fan_out: output });
        let b = store.add(format!("{name}.bias"), &[output], bias);
        Self { w, b }
    }

    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        g.linear(x, w, Some(b))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self::with_gain(store, name, width, 1.0)
    }

    /// Initial gain `gain` on every position, zero shift.
    pub fn with_gain(store: &mut ParamStore, name: &str, width: usize, gain: f64) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), &[width], Init::Constant(gain)),
            beta: store.add(format!("{name}.beta"), &[width], Init::Constant(0.0)),
        }
    }

    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        g.layer_norm(x, gamma, beta)
    }
}

/// Multi-head self-attention over `[B, n, d]` token sequences.
#[derive(Debug, Clone, Copy)]
pub struct SelfAttention {
    q: Dense,
    k: Dense,
    v: Dense,
    out: Dense,
    heads: usize,
}

impl SelfAttention {
    pub fn new(store: &mut ParamStore, name: &str, d_model: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !d_model.is_multiple_of(heads) {
            return Err(Error::Config(format!("d_model {d_model} is not divisible by {heads} heads")));
        }
        Ok(Self {
            q: Dense::new(store, &format!("{name}.q"), d_model, d_model),
            k: Dense::new(store, &format!("{name}.k"), d_model, d_model),
            v: Dense::new(store, &format!("{name}.v"), d_model, d_model),
            out: Dense::new(store, &format!("{name}.out"), d_model, d_model),
            heads,
        })
    }

    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let s = g.shape(x).to_vec();
        let (b, n, d) = (s[0], s[1], s[2]);
        let (h, dh) = (self.heads, d / self.heads);
        let split = |g: &mut Graph, layer: &Dense| -> Result<Var> {
            let y = layer.apply(g, store, x)?;
            let y = g.reshape(y, &[b, n, h, dh])?;
            let y = g.permute(y, &[0, 2, 1, 3])?;
            g.reshape(y, &[b * h, n, dh])
        };
        let q = split(g, &self.q)?;
        let k = split(g, &self.k)?;
        let v = split(g, &self.v)?;
        let (ctx, weights) = g.scaled_dot_attention(q, k, v)?;
        g.tag(ATTENTION_TAG, weights);
        let ctx = g.reshape(ctx, &[b, h, n, dh])?;
        let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
        let ctx = g.reshape(ctx, &[b, n, d])?;
        self.out.apply(g, store, ctx)
    }
}

/// Pre-norm encoder layer: `x + attn(ln(x))`, then `x + ffn(ln(x))` with a
/// GELU feed-forward of width `4·d_model`.
#[derive(Debug, Clone, Copy)]
pub struct EncoderLayer {
    norm_attn: LayerNorm,
    attn: SelfAttention,
    norm_ff: LayerNorm,
    ff_in: Dense,
    ff_out: Dense,
}

impl EncoderLayer {
    pub fn new(store: &mut ParamStore, name: &str, d_model: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            norm_attn: LayerNorm::new(store, &format!("{name}.norm_attn"), d_model),
            attn: SelfAttention::new(store, &format!("{name}.attn"), d_model, heads)?,
            norm_ff: LayerNorm::new(store, &format!("{name}.norm_ff"), d_model),
            ff_in: Dense::new(store, &format!("{name}.ff_in"), d_model, 4 * d_model),
            ff_out: Dense::new(store, &format!("{name}.ff_out"), 4 * d_model, d_model),
        })
    }

    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let y = self.norm_attn.apply(g, store, x)?;
        let y = self.attn.apply(g, store, y)?;
        let x = g.add(x, y)?;
        let y = self.norm_ff.apply(g, store, x)?;
        let y = self.ff_in.apply(g, store, y)?;
        let y = g.gelu(y);
        let y = self.ff_out.apply(g, store, y)?;
        g.add(x, y)
    }
}
