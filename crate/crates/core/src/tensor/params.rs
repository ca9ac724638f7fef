use super::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Initialization rule for one parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    Glorot {
        fan_in: usize,
        fan_out: usize,
    },
    Constant(f64),
    /// Zeros everywhere except `value` on `[start, start + len)`.
    ConstantSlice {
        start: usize,
        len: usize,
        value: f64,
    },
}

impl Init {
    pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }

    fn fill(&self, data: &mut [f64], rng: &mut ChaCha8Rng) {
        match *self {
            Init::Glorot { fan_in, fan_out } => {
                let bound = Self::glorot_bound(fan_in, fan_out);
                for v in data.iter_mut() {
                    *v = rng.random_range(-bound..=bound);
                }
            }
            Init::Constant(c) => data.fill(c),
            Init::ConstantSlice { start, len, value } => {
                data.fill(0.0);
                data[start..start + len].fill(value);
            }
        }
    }
}

/// Ordered collection of learnable tensors.
///
/// Order is fixed at construction, so optimizer state and checkpoints can be
/// aligned by position.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    inits: Vec<Init>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Values are filled by the next [`reset`](Self::reset).
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> ParamId {
        let mut t = Tensor::zeros(shape);
        t.requires_grad = true;
        self.names.push(name.into());
        self.tensors.push(t);
        self.inits.push(init);
        ParamId(self.tensors.len() - 1)
    }

    /// Re-draws every parameter from its init rule, in registration order.
    pub fn reset(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (t, init) in self.tensors.iter_mut().zip(&self.inits) {
            init.fill(t.data_mut(), &mut rng);
            t.grad = None;
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    /// Adds `g` into the stored gradient of `id`, allocating it on first use.
    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &[f64]) {
        let t = &mut self.tensors[id.0];
        let n = t.len();
        let acc = t.grad.get_or_insert_with(|| vec![0.0; n]);
        for (a, b) in acc.iter_mut().zip(g) {
            *a += b;
        }
    }

    /// All parameter values flattened in registration order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// All stored gradients flattened like [`flat_values`](Self::flat_values);
    /// a parameter without a gradient contributes zeros.
    pub fn flat_grads(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| match &t.grad {
                Some(g) => g.clone(),
                None => vec![0.0; t.len()],
            })
            .collect()
    }

    /// Overwrites all values from a flat slice in registration order.
    pub fn load_flat(&mut self, values: &[f64]) -> crate::Result<()> {
        if values.len() != self.scalar_count() {
            return Err(crate::Error::dim(format!(
                "expected {} parameter values, got {}",
                self.scalar_count(),
                values.len()
            )));
        }
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }
}
