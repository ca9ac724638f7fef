//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use hrbench_core::gradcheck::{self, GradCheck};
use hrbench_core::models::itransformer::{ITransformer, ITransformerConfig};
use hrbench_core::models::lstm::{Lstm, LstmConfig};
use hrbench_core::models::patchtst::{PatchTst, PatchTstConfig};
use hrbench_core::models::tcn::{Tcn, TcnConfig};
use hrbench_core::models::timesnet::{TimesNet, TimesNetConfig};
use hrbench_core::models::tsmixer::{TsMixer, TsMixerConfig};
use hrbench_core::models::{ForecastModel, ModelKind};
use hrbench_core::tensor::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn uniform(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn innovations(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

/// Stationary AR(1) after a 200-sample burn-in.
pub fn simulate_ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let e = innovations(seed, n + 200);
    let mut x = 0.0;
    let mut out = Vec::with_capacity(n);
    for (t, v) in e.iter().enumerate() {
        x = phi * x + v;
        if t >= 200 {
            out.push(x);
        }
    }
    out
}

pub fn simulate_seasonal_ma(theta: f64, period: usize, n: usize, seed: u64) -> Vec<f64> {
    let e = innovations(seed, n + period);
    (period..n + period).map(|t| e[t] + theta * e[t - period]).collect()
}

/// Small configuration of each neural model, initialized from a fixed seed.
pub fn toy(kind: ModelKind) -> Box<dyn ForecastModel> {
    let mut m: Box<dyn ForecastModel> = match kind {
        ModelKind::Lstm => Box::new(Lstm::new(LstmConfig { layers: 2, hidden: 4 }, 8, 2).unwrap()),
        ModelKind::Tcn => {
            Box::new(Tcn::new(TcnConfig { blocks: 3, kernel: 3, dilation_base: 2, channels: 4 }, 16, 2).unwrap())
        }
        ModelKind::TsMixer => {
            Box::new(TsMixer::new(TsMixerConfig { mlp_layers: 2, max_feature_dim: 4 }, 8, 2).unwrap())
        }
        ModelKind::TimesNet => Box::new(
            TimesNet::new(TimesNetConfig { fft_blocks: 1, conv_blocks: 2, top_k_periods: 2, d_model: 3 }, 16, 4)
                .unwrap(),
        ),
        ModelKind::PatchTst => Box::new(
            PatchTst::new(PatchTstConfig { patch_len: 4, n_layers: 2, n_heads: 2, d_model: 8, stride: None }, 12, 2)
                .unwrap(),
        ),
        ModelKind::ITransformer => Box::new(
            ITransformer::new(
                ITransformerConfig { blocks: 1, layers_per_block: 2, n_heads: 2, d_model: 8, variate_channels: 3 },
                12,
                2,
            )
            .unwrap(),
        ),
        other => panic!("{other} is not neural"),
    };
    m.reset(11);
    m
}

pub fn loss_of(model: &dyn ForecastModel, x: &[f64], y: &[f64]) -> f64 {
    let p = model.predict(x).unwrap();
    p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
}

/// Analytic parameter gradients of the MSE loss against central differences.
pub fn model_gradcheck(model: &mut dyn ForecastModel, batch: usize) -> GradCheck {
    let (l, h) = (model.lookback(), model.horizon());
    let x = uniform(3, batch * l);
    let y = uniform(4, batch * h);
    let mut g = Graph::new();
    let xv = g.constant(Tensor::new(&[batch, l], x.clone()).unwrap());
    let yv = g.constant(Tensor::new(&[batch, h], y.clone()).unwrap());
    let pred = model.forward(&mut g, xv).unwrap();
    let loss = g.mse_loss(pred, yv).unwrap();
    g.backward(loss).unwrap();
    model.params_mut().zero_grad();
    g.accumulate_param_grads(model.params_mut());
    let analytic = model.params().flat_grads();
    let theta = model.params().flat_values();
    let mut probe = model.box_clone();
    gradcheck::check(&theta, &analytic, |t| {
        probe.params_mut().load_flat(t).unwrap();
        loss_of(probe.as_ref(), &x, &y)
    })
}

/// Input gradients of `mse(f(inputs), target)` against central differences.
pub fn op_gradcheck(inputs: &[Tensor], f: impl Fn(&mut Graph, &[Var]) -> Var) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let shapes: Vec<Vec<usize>> = inputs.iter().map(|t| t.shape().to_vec()).collect();
    let sizes: Vec<usize> = inputs.iter().map(Tensor::len).collect();
    let out_shape = {
        let mut g = Graph::new();
        let vs: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
        let o = f(&mut g, &vs);
        g.shape(o).to_vec()
    };
    let target = rand_tensor(&mut rng, &out_shape);
    let build = |flat: &[f64], track: bool| {
        let mut g = Graph::new();
        let mut off = 0;
        let mut vs = Vec::new();
        for (s, n) in shapes.iter().zip(&sizes) {
            let t = Tensor::new(s, flat[off..off + n].to_vec()).unwrap();
            vs.push(if track { g.input(t) } else { g.constant(t) });
            off += n;
        }
        let o = f(&mut g, &vs);
        let tv = g.constant(target.clone());
        let loss = g.mse_loss(o, tv).unwrap();
        (g, vs, loss)
    };
    let flat: Vec<f64> = inputs.iter().flat_map(|t| t.data().to_vec()).collect();
    let (mut g, vs, loss) = build(&flat, true);
    g.backward(loss).unwrap();
    let analytic: Vec<f64> =
        vs.iter().zip(&sizes).flat_map(|(v, &n)| g.grad(*v).map_or(vec![0.0; n], <[f64]>::to_vec)).collect();
    gradcheck::check(&flat, &analytic, |x| {
        let (g, _, loss) = build(x, false);
        g.value(loss).item()
    })
}
