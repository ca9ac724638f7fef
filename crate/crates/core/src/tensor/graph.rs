use super::fft::{fft_inplace, real_spectrum, Complex};
use super::gemm::{gemm, MatMut, MatRef};
use super::params::{ParamId, ParamStore};
use super::{split_axis, Tensor};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    BatchMatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Gelu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax { x: Var, axis: usize },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Permute { x: Var, perm: Vec<usize> },
    Reshape(Var),
    Slice { x: Var, axis: usize, start: usize },
    Concat { xs: Vec<Var>, axis: usize },
    IndexSelect { x: Var, axis: usize, idx: Vec<usize> },
    Conv1d { x: Var, w: Var, b: Option<Var>, dilation: usize, cols: Vec<f64> },
    Conv2d { x: Var, w: Var, b: Option<Var>, cols: Vec<f64> },
    RfftMag { x: Var, spectrum: Vec<Complex> },
    MeanAxis { x: Var, axis: usize },
    Mse { pred: Var, target: Var },
    LstmCell { z: Var, prev: Option<Var>, gates: Vec<f64> },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf | Param => vec![],
            MatMul { a, b, .. } | BatchMatMul { a, b, .. } => vec![*a, *b],
            Add(a, b) | Sub(a, b) | Mul(a, b) | AddBias(a, b) => vec![*a, *b],
            Scale(x, _) | Relu(x) | Gelu(x) | Sigmoid(x) | Tanh(x) | Reshape(x) => vec![*x],
            Softmax { x, .. }
            | Permute { x, .. }
            | Slice { x, .. }
            | IndexSelect { x, .. }
            | RfftMag { x, .. }
            | MeanAxis { x, .. } => vec![*x],
            LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Concat { xs, .. } => xs.clone(),
            Conv1d { x, w, b, .. } | Conv2d { x, w, b, .. } => {
                let mut v = vec![*x, *w];
                v.extend(b.iter().copied());
                v
            }
            Mse { pred, target } => vec![*pred, *target],
            LstmCell { z, prev, .. } => {
                let mut v = vec![*z];
                v.extend(prev.iter().copied());
                v
            }
        }
    }
}

/// Counters from one backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardStats {
    /// Nodes whose backward rule ran.
    pub visited: usize,
    /// Largest number of times any single node was visited (always ≤ 1).
    pub max_visits_per_node: u32,
}

/// Operation tape for one forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    values: Vec<Tensor>,
    ops: Vec<Op>,
    req: Vec<bool>,
    grads: Vec<Option<Vec<f64>>>,
    param_vars: HashMap<ParamId, Var>,
    tags: Vec<(&'static str, Var)>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const LN_EPS: f64 = 1e-5;

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let req = match &op {
            Op::Leaf => false,
            Op::Param => true,
            other => other.inputs().iter().any(|v| self.req[v.0]),
        };
        self.values.push(value);
        self.ops.push(op);
        self.req.push(req);
        self.grads.push(None);
        Var(self.values.len() - 1)
    }

    /// Constant input; no gradient is tracked.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t.detached(), Op::Leaf)
    }

    /// Input leaf whose gradient is tracked and readable via [`grad`](Self::grad).
    pub fn input(&mut self, t: Tensor) -> Var {
        let v = self.push(t.detached(), Op::Leaf);
        self.req[v.0] = true;
        v
    }

    /// Brings a stored parameter into the graph. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).detached(), Op::Param);
        self.param_vars.insert(id, v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.values[v.0].shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    pub fn tag(&mut self, name: &'static str, v: Var) {
        self.tags.push((name, v));
    }

    pub fn tagged<'a>(&'a self, name: &'a str) -> impl Iterator<Item = Var> + 'a {
        self.tags.iter().filter(move |(n, _)| *n == name).map(|(_, v)| *v)
    }

    // ---- linear algebra -------------------------------------------------

    /// 2-D product `op(a)·op(b)` where `op` optionally transposes.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 {
            return Err(Error::dim(format!("matmul needs 2-D operands, got {sa:?} and {sb:?}")));
        }
        let am = MatRef::new(self.values[a.0].data(), sa[0], sa[1], ta);
        let bm = MatRef::new(self.values[b.0].data(), sb[0], sb[1], tb);
        if am.cols != bm.rows {
            return Err(Error::dim(format!(
                "matmul inner dimensions disagree: {sa:?}{} · {sb:?}{}",
                if ta { "ᵀ" } else { "" },
                if tb { "ᵀ" } else { "" }
            )));
        }
        let (m, n) = (am.rows, bm.cols);
        let mut out = vec![0.0; m * n];
        gemm(am, bm, MatMut::new(&mut out, m, n, false), 0.0);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMul { a, b, ta, tb }))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// Batched 3-D product over the leading axis.
    pub fn bmm(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(Error::dim(format!("bmm needs matching 3-D operands, got {sa:?} and {sb:?}")));
        }
        let (ar, ac) = if ta { (sa[2], sa[1]) } else { (sa[1], sa[2]) };
        let (br, bc) = if tb { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if ac != br {
            return Err(Error::dim(format!("bmm inner dimensions disagree: {sa:?} · {sb:?}")));
        }
        let batch = sa[0];
        let (asz, bsz, csz) = (sa[1] * sa[2], sb[1] * sb[2], ar * bc);
        let mut out = vec![0.0; batch * csz];
        let (ad, bd) = (self.values[a.0].data(), self.values[b.0].data());
        for i in 0..batch {
            gemm(
                MatRef::new(&ad[i * asz..(i + 1) * asz], sa[1], sa[2], ta),
                MatRef::new(&bd[i * bsz..(i + 1) * bsz], sb[1], sb[2], tb),
                MatMut::new(&mut out[i * csz..(i + 1) * csz], ar, bc, false),
                0.0,
            );
        }
        Ok(self.push(Tensor::new(&[batch, ar, bc], out)?, Op::BatchMatMul { a, b, ta, tb }))
    }

    // ---- elementwise ----------------------------------------------------

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(format!("{what}: shapes {:?} and {:?} differ", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let data = self.values[a.0].data().iter().zip(self.values[b.0].data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(self.push(Tensor::new(&shape, data)?, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// `x + bias` where `bias.shape` equals the trailing dimensions of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x).to_vec(), self.shape(bias).to_vec());
        if sb.len() > sx.len() || sx[sx.len() - sb.len()..] != sb[..] {
            return Err(Error::dim(format!("bias {sb:?} does not match trailing dims of {sx:?}")));
        }
        let bd = self.values[bias.0].data();
        let m = bd.len();
        let data = self.values[x.0].data().iter().enumerate().map(|(i, v)| v + bd[i % m]).collect();
        Ok(self.push(Tensor::new(&sx, data)?, Op::AddBias(x, bias)))
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let t = &self.values[x.0];
        let shape = t.shape().to_vec();
        let data = t.data().iter().map(|&v| f(v)).collect();
        self.push(Tensor::new(&shape, data).expect("same shape"), op)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu(x), |v| v.max(0.0))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        self.map(x, Op::Gelu(x), |v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh()))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x), f64::tanh)
    }

    // ---- normalization --------------------------------------------------

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::dim(format!("softmax axis {axis} invalid for shape {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let xd = self.values[x.0].data();
        let mut out = vec![0.0; xd.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * n * inner + j * inner + i;
                let mx = (0..n).map(|j| xd[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for j in 0..n {
                    let e = (xd[at(j)] - mx).exp();
                    out[at(j)] = e;
                    sum += e;
                }
                for j in 0..n {
                    out[at(j)] /= sum;
                }
            }
        }
        Ok(self.push(Tensor::new(&shape, out)?, Op::Softmax { x, axis }))
    }

    /// Layer normalization over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().unwrap();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::dim(format!(
                "layer_norm affine params must be [{d}], got {:?} and {:?}",
                self.shape(gamma),
                self.shape(beta)
            )));
        }
        let xd = self.values[x.0].data();
        let (gd, bd) = (self.values[gamma.0].data(), self.values[beta.0].data());
        let rows = xd.len() / d;
        let mut xhat = vec![0.0; xd.len()];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; xd.len()];
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gd[j] + bd[j];
            }
        }
        Ok(self.push(Tensor::new(&shape, out)?, Op::LayerNorm { x, gamma, beta, xhat, rstd }))
    }

    // ---- shape ----------------------------------------------------------

    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len() || perm.iter().any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::dim(format!("invalid permutation {perm:?} for shape {shape:?}")));
        }
        let (out_shape, out) = permute_data(self.values[x.0].data(), &shape, perm);
        Ok(self.push(Tensor::new(&out_shape, out)?, Op::Permute { x, perm: perm.to_vec() }))
    }

    /// Swaps two axes.
    pub fn transpose(&mut self, x: Var, a: usize, b: usize) -> Result<Var> {
        let mut perm: Vec<usize> = (0..self.shape(x).len()).collect();
        if a >= perm.len() || b >= perm.len() {
            return Err(Error::dim(format!("transpose axes {a},{b} invalid for {:?}", self.shape(x))));
        }
        perm.swap(a, b);
        self.permute(x, &perm)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.values[x.0].detached().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::dim(format!(
                "slice [{start}, {}) on axis {axis} out of range for {shape:?}",
                start + len
            )));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let xd = self.values[x.0].data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner + start * inner;
            out.extend_from_slice(&xd[base..base + len * inner]);
        }
        let mut os = shape.clone();
        os[axis] = len;
        Ok(self.push(Tensor::new(&os, out)?, Op::Slice { x, axis, start }))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = self.shape(*xs.first().ok_or_else(|| Error::dim("concat of nothing"))?).to_vec();
        if axis >= first.len() {
            return Err(Error::dim(format!("concat axis {axis} invalid for {first:?}")));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let ok = s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(Error::dim(format!("concat shapes {first:?} and {s:?} incompatible on axis {axis}")));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&first, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let n = self.shape(v)[axis];
                let d = self.values[v.0].data();
                out.extend_from_slice(&d[o * n * inner..(o + 1) * n * inner]);
            }
        }
        let mut os = first;
        os[axis] = total;
        Ok(self.push(Tensor::new(&os, out)?, Op::Concat { xs: xs.to_vec(), axis }))
    }

    /// Gathers entries `idx` (repeats allowed) along `axis`.
    pub fn index_select(&mut self, x: Var, axis: usize, idx: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || idx.is_empty() || idx.iter().any(|&i| i >= shape[axis]) {
            return Err(Error::dim(format!("index_select on axis {axis} out of range for {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let xd = self.values[x.0].data();
        let mut out = Vec::with_capacity(outer * idx.len() * inner);
        for o in 0..outer {
            for &j in idx {
                let base = o * n * inner + j * inner;
                out.extend_from_slice(&xd[base..base + inner]);
            }
        }
        let mut os = shape;
        os[axis] = idx.len();
        Ok(self.push(Tensor::new(&os, out)?, Op::IndexSelect { x, axis, idx: idx.to_vec() }))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::dim(format!("mean axis {axis} invalid for {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let xd = self.values[x.0].data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..n {
                for i in 0..inner {
                    out[o * inner + i] += xd[o * n * inner + j * inner + i];
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= n as f64);
        let mut os = shape;
        os.remove(axis);
        if os.is_empty() {
            os.push(1);
        }
        Ok(self.push(Tensor::new(&os, out)?, Op::MeanAxis { x, axis }))
    }

    // ---- convolution ----------------------------------------------------

    /// Causal dilated 1-D convolution.
    ///
    /// `x` is `[C, L]` or `[B, C, L]`, `w` is `[O, C, K]`, `bias` is `[O]`.
    /// Output keeps length `L`: the input is left-padded with `(K−1)·dilation`
    /// zeros, so output at `t` reads only `x[..=t]`.
    pub fn conv1d(&mut self, x: Var, w: Var, bias: Option<Var>, dilation: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let (b, c, l) = match sx.len() {
            2 => (1, sx[0], sx[1]),
            3 => (sx[0], sx[1], sx[2]),
            _ => return Err(Error::dim(format!("conv1d input must be [C,L] or [B,C,L], got {sx:?}"))),
        };
        if sw.len() != 3 || sw[1] != c {
            return Err(Error::dim(format!("conv1d kernel {sw:?} does not match input channels of {sx:?}")));
        }
        if dilation == 0 {
            return Err(Error::Input("conv1d dilation must be ≥ 1".into()));
        }
        let (o, k) = (sw[0], sw[2]);
        if let Some(bv) = bias {
            if self.shape(bv) != [o] {
                return Err(Error::dim(format!("conv1d bias must be [{o}], got {:?}", self.shape(bv))));
            }
        }
        let ck = c * k;
        let xd = self.values[x.0].data();
        let mut cols = vec![0.0; b * ck * l];
        for bi in 0..b {
            for ci in 0..c {
                let xrow = &xd[(bi * c + ci) * l..(bi * c + ci + 1) * l];
                for ki in 0..k {
                    let lag = (k - 1 - ki) * dilation;
                    let dst = &mut cols[(bi * ck + ci * k + ki) * l..(bi * ck + ci * k + ki + 1) * l];
                    if lag < l {
                        dst[lag..].copy_from_slice(&xrow[..l - lag]);
                    }
                }
            }
        }
        let wd = self.values[w.0].data();
        let mut out = vec![0.0; b * o * l];
        for bi in 0..b {
            gemm(
                MatRef::new(wd, o, ck, false),
                MatRef::new(&cols[bi * ck * l..(bi + 1) * ck * l], ck, l, false),
                MatMut::new(&mut out[bi * o * l..(bi + 1) * o * l], o, l, false),
                0.0,
            );
        }
        if let Some(bv) = bias {
            let bd = self.values[bv.0].data();
            for (r, chunk) in out.chunks_mut(l).enumerate() {
                let add = bd[r % o];
                chunk.iter_mut().for_each(|v| *v += add);
            }
        }
        let os = if sx.len() == 2 { vec![o, l] } else { vec![b, o, l] };
        Ok(self.push(Tensor::new(&os, out)?, Op::Conv1d { x, w, b: bias, dilation, cols }))
    }

    /// 2-D convolution with "same" zero padding in NHWC layout.
    ///
    /// `x` is `[B, H, W, C]`, `w` is `[KH, KW, C, O]` with odd kernel sizes,
    /// `bias` is `[O]`; output is `[B, H, W, O]`.
    pub fn conv2d_same(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        if sx.len() != 4 || sw.len() != 4 || sw[2] != sx[3] || sw[0].is_multiple_of(2) || sw[1].is_multiple_of(2) {
            return Err(Error::dim(format!("conv2d shapes incompatible: input {sx:?}, kernel {sw:?}")));
        }
        let (b, h, wd_, c) = (sx[0], sx[1], sx[2], sx[3]);
        let (kh, kw, o) = (sw[0], sw[1], sw[3]);
        if let Some(bv) = bias {
            if self.shape(bv) != [o] {
                return Err(Error::dim(format!("conv2d bias must be [{o}], got {:?}", self.shape(bv))));
            }
        }
        let (ph, pw) = (kh / 2, kw / 2);
        let kc = kh * kw * c;
        let rows = b * h * wd_;
        let xd = self.values[x.0].data();
        let mut cols = vec![0.0; rows * kc];
        for bi in 0..b {
            for y in 0..h {
                for xx in 0..wd_ {
                    let r = (bi * h + y) * wd_ + xx;
                    for i in 0..kh {
                        let sy = y as isize + i as isize - ph as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for j in 0..kw {
                            let sxx = xx as isize + j as isize - pw as isize;
                            if sxx < 0 || sxx >= wd_ as isize {
                                continue;
                            }
                            let src = ((bi * h + sy as usize) * wd_ + sxx as usize) * c;
                            let dst = r * kc + (i * kw + j) * c;
                            cols[dst..dst + c].copy_from_slice(&xd[src..src + c]);
                        }
                    }
                }
            }
        }
        let mut out = vec![0.0; rows * o];
        gemm(
            MatRef::new(&cols, rows, kc, false),
            MatRef::new(self.values[w.0].data(), kc, o, false),
            MatMut::new(&mut out, rows, o, false),
            0.0,
        );
        if let Some(bv) = bias {
            let bd = self.values[bv.0].data();
            for row in out.chunks_mut(o) {
                row.iter_mut().zip(bd).for_each(|(v, bb)| *v += bb);
            }
        }
        Ok(self.push(Tensor::new(&[b, h, wd_, o], out)?, Op::Conv2d { x, w, b: bias, cols }))
    }

    // ---- spectral -------------------------------------------------------

    /// Real-input DFT magnitudes along the last axis: `[..., n] → [..., n/2+1]`.
    pub fn rfft_mag(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap();
        if n < 2 {
            return Err(Error::Input(format!("rfft needs at least 2 samples, got {n}")));
        }
        let bins = n / 2 + 1;
        let xd = self.values[x.0].data();
        let rows = xd.len() / n;
        let mut spectrum = Vec::with_capacity(rows * n);
        let mut out = Vec::with_capacity(rows * bins);
        for r in 0..rows {
            let s = real_spectrum(&xd[r * n..(r + 1) * n]);
            out.extend(s[..bins].iter().map(|c| c.norm()));
            spectrum.extend(s);
        }
        let mut os = shape;
        *os.last_mut().unwrap() = bins;
        Ok(self.push(Tensor::new(&os, out)?, Op::RfftMag { x, spectrum }))
    }

    // ---- recurrent ------------------------------------------------------

    /// Fused LSTM cell. `z` is `[B, 4h]` gate pre-activations ordered input,
    /// forget, candidate, output; `prev` is the previous `[B, 2h]` state or
    /// `None` for a zero state. Returns the state `[B, 2h]` holding the hidden
    /// output in the first `h` columns and the cell in the last `h`.
    pub fn lstm_cell(&mut self, z: Var, prev: Option<Var>) -> Result<Var> {
        let sz = self.shape(z).to_vec();
        if sz.len() != 2 || !sz[1].is_multiple_of(4) || sz[1] == 0 {
            return Err(Error::dim(format!("lstm_cell gates must be [B, 4h], got {sz:?}")));
        }
        let (b, h) = (sz[0], sz[1] / 4);
        if let Some(p) = prev {
            if self.shape(p) != [b, 2 * h] {
                return Err(Error::dim(format!("lstm_cell state must be [{b}, {}], got {:?}", 2 * h, self.shape(p))));
            }
        }
        let zd = self.values[z.0].data();
        let pd = prev.map(|p| self.values[p.0].data());
        let mut gates = vec![0.0; b * 4 * h];
        let mut out = vec![0.0; b * 2 * h];
        for r in 0..b {
            let zr = &zd[r * 4 * h..(r + 1) * 4 * h];
            let gr = &mut gates[r * 4 * h..(r + 1) * 4 * h];
            for j in 0..h {
                let (i, f, c, o) = (sigmoid(zr[j]), sigmoid(zr[h + j]), zr[2 * h + j].tanh(), sigmoid(zr[3 * h + j]));
                gr[j] = i;
                gr[h + j] = f;
                gr[2 * h + j] = c;
                gr[3 * h + j] = o;
                let kept = pd.map_or(0.0, |p| f * p[r * 2 * h + h + j]);
                let cell = kept + i * c;
                out[r * 2 * h + h + j] = cell;
                out[r * 2 * h + j] = o * cell.tanh();
            }
        }
        Ok(self.push(Tensor::new(&[b, 2 * h], out)?, Op::LstmCell { z, prev, gates }))
    }

    // ---- losses ---------------------------------------------------------

    /// Mean squared error, returned as a `[1]` tensor.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "mse_loss")?;
        let (p, t) = (self.values[pred.0].data(), self.values[target.0].data());
        let sse: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = sse / p.len() as f64;
        Ok(self.push(Tensor::scalar(v), Op::Mse { pred, target }))
    }

    // ---- composites -----------------------------------------------------

    /// `x·w + b` over the last axis of `x` (any rank ≥ 1). `w` is `[in, out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let din = *sx.last().unwrap();
        if sw.len() != 2 || sw[0] != din {
            return Err(Error::dim(format!("linear weight {sw:?} does not accept input {sx:?}")));
        }
        let rows: usize = sx[..sx.len() - 1].iter().product();
        let x2 = if sx.len() == 2 { x } else { self.reshape(x, &[rows, din])? };
        let mut y = self.matmul(x2, w)?;
        if let Some(b) = b {
            y = self.add_bias(y, b)?;
        }
        if sx.len() == 2 {
            Ok(y)
        } else {
            let mut os = sx;
            *os.last_mut().unwrap() = sw[1];
            self.reshape(y, &os)
        }
    }

    /// `softmax(q·kᵀ/√d)·v` for `[h, n, d]` operands. Returns the output and
    /// the attention weights `[h, n, n]`.
    pub fn scaled_dot_attention(&mut self, q: Var, k: Var, v: Var) -> Result<(Var, Var)> {
        let (sq, sk, sv) = (self.shape(q).to_vec(), self.shape(k).to_vec(), self.shape(v).to_vec());
        if sq.len() != 3 || sq != sk || sk[..2] != sv[..2] {
            return Err(Error::dim(format!("attention operands disagree: q {sq:?}, k {sk:?}, v {sv:?}")));
        }
        let scores = self.bmm(q, k, false, true)?;
        let scores = self.scale(scores, 1.0 / (sq[2] as f64).sqrt());
        let weights = self.softmax(scores, 2)?;
        let out = self.bmm(weights, v, false, false)?;
        Ok((out, weights))
    }

    // ---- backward -------------------------------------------------------

    /// Reverse pass from a single-element `loss`. Gradients accumulate into
    /// every node that requires them; call [`accumulate_param_grads`] to move
    /// parameter gradients into their store.
    ///
    /// [`accumulate_param_grads`]: Self::accumulate_param_grads
    pub fn backward(&mut self, loss: Var) -> Result<BackwardStats> {
        if self.values[loss.0].len() != 1 {
            return Err(Error::dim(format!("backward needs a scalar loss, got shape {:?}", self.shape(loss))));
        }
        let mut visits = vec![0u32; loss.0 + 1];
        let Graph { values, ops, req, grads, .. } = self;
        acc(grads, req, values, loss, |g| g[0] += 1.0);
        let mut visited = 0;
        for i in (0..=loss.0).rev() {
            if !req[i] || matches!(ops[i], Op::Leaf | Op::Param) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            visits[i] += 1;
            visited += 1;
            backward_node(&ops[i], &values[i], &g, values, req, grads);
        }
        Ok(BackwardStats { visited, max_visits_per_node: visits.into_iter().max().unwrap_or(0) })
    }

    /// Adds gradients of every parameter leaf into `store`.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (&id, &v) in &self.param_vars {
            if let Some(g) = &self.grads[v.0] {
                store.accumulate_grad(id, g);
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], req: &[bool], values: &[Tensor], v: Var, f: impl FnOnce(&mut [f64])) {
    if !req[v.0] {
        return;
    }
    let n = values[v.0].len();
    f(grads[v.0].get_or_insert_with(|| vec![0.0; n]));
}

fn permute_data(data: &[f64], shape: &[usize], perm: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let nd = shape.len();
    let mut in_strides = vec![1usize; nd];
    for i in (0..nd.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    if nd == 0 {
        return (out_shape, data.to_vec());
    }
    // Odometer over all but the last output axis; the last axis is a strided run.
    let last = nd - 1;
    let (run, run_stride) = (out_shape[last], strides[last]);
    let mut idx = vec![0usize; nd];
    let mut off = 0usize;
    loop {
        for r in 0..run {
            out.push(data[off + r * run_stride]);
        }
        let mut ax = last;
        loop {
            if ax == 0 {
                return (out_shape, out);
            }
            ax -= 1;
            idx[ax] += 1;
            off += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
}

#[allow(clippy::too_many_lines)]
fn backward_node(op: &Op, out: &Tensor, g: &[f64], values: &[Tensor], req: &[bool], grads: &mut [Option<Vec<f64>>]) {
    let val = |v: Var| values[v.0].data();
    let shp = |v: Var| values[v.0].shape();
    match op {
        Op::Leaf | Op::Param => {}
        Op::MatMul { a, b, ta, tb } => {
            let (sa, sb) = (shp(*a).to_vec(), shp(*b).to_vec());
            let am = MatRef::new(val(*a), sa[0], sa[1], *ta);
            let bm = MatRef::new(val(*b), sb[0], sb[1], *tb);
            let gm = MatRef::new(g, am.rows, bm.cols, false);
            acc(grads, req, values, *a, |da| {
                gemm(gm, bm.t(), MatMut::new(da, sa[0], sa[1], *ta), 1.0);
            });
            acc(grads, req, values, *b, |db| {
                gemm(am.t(), gm, MatMut::new(db, sb[0], sb[1], *tb), 1.0);
            });
        }
        Op::BatchMatMul { a, b, ta, tb } => {
            let (sa, sb) = (shp(*a).to_vec(), shp(*b).to_vec());
            let (asz, bsz) = (sa[1] * sa[2], sb[1] * sb[2]);
            let (m, n) = (out.shape()[1], out.shape()[2]);
            let (ad, bd) = (val(*a), val(*b));
            for i in 0..sa[0] {
                let am = MatRef::new(&ad[i * asz..(i + 1) * asz], sa[1], sa[2], *ta);
                let bm = MatRef::new(&bd[i * bsz..(i + 1) * bsz], sb[1], sb[2], *tb);
                let gm = MatRef::new(&g[i * m * n..(i + 1) * m * n], m, n, false);
                acc(grads, req, values, *a, |da| {
                    gemm(gm, bm.t(), MatMut::new(&mut da[i * asz..(i + 1) * asz], sa[1], sa[2], *ta), 1.0);
                });
                acc(grads, req, values, *b, |db| {
                    gemm(am.t(), gm, MatMut::new(&mut db[i * bsz..(i + 1) * bsz], sb[1], sb[2], *tb), 1.0);
                });
            }
        }
        Op::Add(a, b) => {
            acc(grads, req, values, *a, |d| add_into(d, g));
            acc(grads, req, values, *b, |d| add_into(d, g));
        }
        Op::Sub(a, b) => {
            acc(grads, req, values, *a, |d| add_into(d, g));
            acc(grads, req, values, *b, |d| d.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            acc(grads, req, values, *a, |d| {
                for i in 0..d.len() {
                    d[i] += g[i] * bv[i];
                }
            });
            acc(grads, req, values, *b, |d| {
                for i in 0..d.len() {
                    d[i] += g[i] * av[i];
                }
            });
        }
        Op::AddBias(x, b) => {
            acc(grads, req, values, *x, |d| add_into(d, g));
            acc(grads, req, values, *b, |d| {
                let m = d.len();
                for (i, gi) in g.iter().enumerate() {
                    d[i % m] += gi;
                }
            });
        }
        Op::Scale(x, c) => acc(grads, req, values, *x, |d| {
            d.iter_mut().zip(g).for_each(|(a, b)| *a += c * b);
        }),
        Op::Relu(x) => {
            let xv = val(*x);
            acc(grads, req, values, *x, |d| {
                for i in 0..d.len() {
                    if xv[i] > 0.0 {
                        d[i] += g[i];
                    }
                }
            });
        }
        Op::Gelu(x) => {
            let xv = val(*x);
            acc(grads, req, values, *x, |d| {
                for i in 0..d.len() {
                    let v = xv[i];
                    let u = GELU_C * (v + 0.044715 * v * v * v);
                    let th = u.tanh();
                    let du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
                    d[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
                }
            });
        }
        Op::Sigmoid(x) => {
            let y = out.data();
            acc(grads, req, values, *x, |d| {
                for i in 0..d.len() {
                    d[i] += g[i] * y[i] * (1.0 - y[i]);
                }
            });
        }
        Op::Tanh(x) => {
            let y = out.data();
            acc(grads, req, values, *x, |d| {
                for i in 0..d.len() {
                    d[i] += g[i] * (1.0 - y[i] * y[i]);
                }
            });
        }
        Op::Softmax { x, axis } => {
            let y = out.data();
            let (outer, n, inner) = split_axis(out.shape(), *axis);
            acc(grads, req, values, *x, |d| {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * n * inner + j * inner + i;
                        let dot: f64 = (0..n).map(|j| g[at(j)] * y[at(j)]).sum();
                        for j in 0..n {
                            d[at(j)] += y[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
            });
        }
        Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
            let dd = *out.shape().last().unwrap();
            let gv = val(*gamma);
            acc(grads, req, values, *gamma, |d| {
                for (i, gi) in g.iter().enumerate() {
                    d[i % dd] += gi * xhat[i];
                }
            });
            acc(grads, req, values, *beta, |d| {
                for (i, gi) in g.iter().enumerate() {
                    d[i % dd] += gi;
                }
            });
            acc(grads, req, values, *x, |d| {
                let nf = dd as f64;
                let mut dxh = vec![0.0; dd];
                for (r, &rs) in rstd.iter().enumerate() {
                    let base = r * dd;
                    let (mut s1, mut s2) = (0.0, 0.0);
                    for j in 0..dd {
                        dxh[j] = g[base + j] * gv[j];
                        s1 += dxh[j];
                        s2 += dxh[j] * xhat[base + j];
                    }
                    for j in 0..dd {
                        d[base + j] += rs / nf * (nf * dxh[j] - s1 - xhat[base + j] * s2);
                    }
                }
            });
        }
        Op::Permute { x, perm } => {
            let mut inv = vec![0; perm.len()];
            for (i, &p) in perm.iter().enumerate() {
                inv[p] = i;
            }
            let (_, back) = permute_data(g, out.shape(), &inv);
            acc(grads, req, values, *x, |d| add_into(d, &back));
        }
        Op::Reshape(x) => acc(grads, req, values, *x, |d| add_into(d, g)),
        Op::Slice { x, axis, start } => {
            let (outer, n, inner) = split_axis(shp(*x), *axis);
            let len = out.shape()[*axis];
            acc(grads, req, values, *x, |d| {
                for o in 0..outer {
                    let base = o * n * inner + start * inner;
                    add_into(&mut d[base..base + len * inner], &g[o * len * inner..(o + 1) * len * inner]);
                }
            });
        }
        Op::Concat { xs, axis } => {
            let (outer, total, inner) = split_axis(out.shape(), *axis);
            let mut off = 0;
            for &v in xs {
                let n = shp(v)[*axis];
                acc(grads, req, values, v, |d| {
                    for o in 0..outer {
                        let src = o * total * inner + off * inner;
                        add_into(&mut d[o * n * inner..(o + 1) * n * inner], &g[src..src + n * inner]);
                    }
                });
                off += n;
            }
        }
        Op::IndexSelect { x, axis, idx } => {
            let (outer, n, inner) = split_axis(shp(*x), *axis);
            acc(grads, req, values, *x, |d| {
                for o in 0..outer {
                    for (jj, &j) in idx.iter().enumerate() {
                        let dst = o * n * inner + j * inner;
                        let src = (o * idx.len() + jj) * inner;
                        add_into(&mut d[dst..dst + inner], &g[src..src + inner]);
                    }
                }
            });
        }
        Op::MeanAxis { x, axis } => {
            let (outer, n, inner) = split_axis(shp(*x), *axis);
            acc(grads, req, values, *x, |d| {
                for o in 0..outer {
                    for j in 0..n {
                        for i in 0..inner {
                            d[o * n * inner + j * inner + i] += g[o * inner + i] / n as f64;
                        }
                    }
                }
            });
        }
        Op::Conv1d { x, w, b, dilation, cols } => {
            let sx = shp(*x);
            let (bn, c, l) = if sx.len() == 2 { (1, sx[0], sx[1]) } else { (sx[0], sx[1], sx[2]) };
            let sw = shp(*w);
            let (o, k) = (sw[0], sw[2]);
            let ck = c * k;
            if let Some(bv) = b {
                acc(grads, req, values, *bv, |d| {
                    for (r, chunk) in g.chunks(l).enumerate() {
                        d[r % o] += chunk.iter().sum::<f64>();
                    }
                });
            }
            acc(grads, req, values, *w, |d| {
                for bi in 0..bn {
                    gemm(
                        MatRef::new(&g[bi * o * l..(bi + 1) * o * l], o, l, false),
                        MatRef::new(&cols[bi * ck * l..(bi + 1) * ck * l], ck, l, true),
                        MatMut::new(d, o, ck, false),
                        1.0,
                    );
                }
            });
            if req[x.0] {
                let wv = val(*w);
                let mut dcols = vec![0.0; bn * ck * l];
                for bi in 0..bn {
                    gemm(
                        MatRef::new(wv, o, ck, true),
                        MatRef::new(&g[bi * o * l..(bi + 1) * o * l], o, l, false),
                        MatMut::new(&mut dcols[bi * ck * l..(bi + 1) * ck * l], ck, l, false),
                        0.0,
                    );
                }
                acc(grads, req, values, *x, |d| {
                    for bi in 0..bn {
                        for ci in 0..c {
                            let drow = &mut d[(bi * c + ci) * l..(bi * c + ci + 1) * l];
                            for ki in 0..k {
                                let lag = (k - 1 - ki) * dilation;
                                if lag >= l {
                                    continue;
                                }
                                let src = &dcols[(bi * ck + ci * k + ki) * l..(bi * ck + ci * k + ki + 1) * l];
                                add_into(&mut drow[..l - lag], &src[lag..]);
                            }
                        }
                    }
                });
            }
        }
        Op::Conv2d { x, w, b, cols } => {
            let sx = shp(*x).to_vec();
            let sw = shp(*w).to_vec();
            let (bn, h, wd_, c) = (sx[0], sx[1], sx[2], sx[3]);
            let (kh, kw, o) = (sw[0], sw[1], sw[3]);
            let (ph, pw) = (kh / 2, kw / 2);
            let kc = kh * kw * c;
            let rows = bn * h * wd_;
            if let Some(bv) = b {
                acc(grads, req, values, *bv, |d| {
                    for row in g.chunks(o) {
                        add_into(d, row);
                    }
                });
            }
            acc(grads, req, values, *w, |d| {
                gemm(
                    MatRef::new(cols, rows, kc, true),
                    MatRef::new(g, rows, o, false),
                    MatMut::new(d, kc, o, false),
                    1.0,
                );
            });
            if req[x.0] {
                let mut dcols = vec![0.0; rows * kc];
                gemm(
                    MatRef::new(g, rows, o, false),
                    MatRef::new(val(*w), kc, o, true),
                    MatMut::new(&mut dcols, rows, kc, false),
                    0.0,
                );
                acc(grads, req, values, *x, |d| {
                    for bi in 0..bn {
                        for y in 0..h {
                            for xx in 0..wd_ {
                                let r = (bi * h + y) * wd_ + xx;
                                for i in 0..kh {
                                    let sy = y as isize + i as isize - ph as isize;
                                    if sy < 0 || sy >= h as isize {
                                        continue;
                                    }
                                    for j in 0..kw {
                                        let sxx = xx as isize + j as isize - pw as isize;
                                        if sxx < 0 || sxx >= wd_ as isize {
                                            continue;
                                        }
                                        let dst = ((bi * h + sy as usize) * wd_ + sxx as usize) * c;
                                        let src = r * kc + (i * kw + j) * c;
                                        add_into(&mut d[dst..dst + c], &dcols[src..src + c]);
                                    }
                                }
                            }
                        }
                    }
                });
            }
        }
        Op::RfftMag { x, spectrum } => {
            let n = *shp(*x).last().unwrap();
            let bins = n / 2 + 1;
            acc(grads, req, values, *x, |d| {
                let rows = d.len() / n;
                let mut buf = vec![Complex::new(0.0, 0.0); n];
                for r in 0..rows {
                    buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                    for k in 0..bins {
                        let xk = spectrum[r * n + k];
                        let mag = xk.norm();
                        if mag > 1e-300 {
                            // conj(w_k) with w_k = g_k · X_k / |X_k|
                            buf[k] = (xk * (g[r * bins + k] / mag)).conj();
                        }
                    }
                    fft_inplace(&mut buf);
                    for t in 0..n {
                        d[r * n + t] += buf[t].re;
                    }
                }
            });
        }
        Op::LstmCell { z, prev, gates } => lstm_cell_backward(*z, *prev, gates, out, g, values, req, grads),
        Op::Mse { pred, target } => {
            let (p, t) = (val(*pred), val(*target));
            let scale = 2.0 * g[0] / p.len() as f64;
            acc(grads, req, values, *pred, |d| {
                for i in 0..d.len() {
                    d[i] += scale * (p[i] - t[i]);
                }
            });
            acc(grads, req, values, *target, |d| {
                for i in 0..d.len() {
                    d[i] -= scale * (p[i] - t[i]);
                }
            });
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn lstm_cell_backward(
    z: Var,
    prev: Option<Var>,
    gates: &[f64],
    out: &Tensor,
    g: &[f64],
    values: &[Tensor],
    req: &[bool],
    grads: &mut [Option<Vec<f64>>],
) {
    let (b, h) = (out.shape()[0], out.shape()[1] / 2);
    let od = out.data();
    let pd = prev.map(|p| values[p.0].data());
    let mut dz = vec![0.0; b * 4 * h];
    let mut dprev = vec![0.0; b * 2 * h];
    for r in 0..b {
        let gr = &gates[r * 4 * h..(r + 1) * 4 * h];
        for j in 0..h {
            let (i, f, c, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
            let tc = od[r * 2 * h + h + j].tanh();
            let dh = g[r * 2 * h + j];
            let dcell = g[r * 2 * h + h + j] + dh * o * (1.0 - tc * tc);
            let cp = pd.map_or(0.0, |p| p[r * 2 * h + h + j]);
            let dzr = &mut dz[r * 4 * h..(r + 1) * 4 * h];
            dzr[j] = dcell * c * i * (1.0 - i);
            dzr[h + j] = dcell * cp * f * (1.0 - f);
            dzr[2 * h + j] = dcell * i * (1.0 - c * c);
            dzr[3 * h + j] = dh * tc * o * (1.0 - o);
            dprev[r * 2 * h + h + j] = dcell * f;
        }
    }
    acc(grads, req, values, z, |d| add_into(d, &dz));
    if let Some(p) = prev {
        acc(grads, req, values, p, |d| add_into(d, &dprev));
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}
