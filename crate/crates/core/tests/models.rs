mod common;

use common::{loss_of, model_gradcheck, toy, uniform};
use hrbench_core::dataset::{make_windows, synth_series, SynthProfile, WindowGeometry};
use hrbench_core::models::itransformer::{ITransformer, ITransformerConfig};
use hrbench_core::models::layers::ATTENTION_TAG;
use hrbench_core::models::lstm::{Lstm, LstmConfig};
use hrbench_core::models::patchtst::{PatchTst, PatchTstConfig};
use hrbench_core::models::tcn::{Tcn, TcnConfig};
use hrbench_core::models::timesnet::{select_periods, TimesNet, TimesNetConfig, BRANCH_WEIGHT_TAG};
use hrbench_core::models::tsmixer::{TsMixer, TsMixerConfig};
use hrbench_core::models::{build_model, read_checkpoint, write_checkpoint, ForecastModel, ModelKind};
use hrbench_core::tensor::{Graph, Init, Tensor};
use hrbench_core::train::{AdamState, TrainConfig};
use proptest::prelude::*;

#[test]
fn every_toy_model_passes_gradient_check() {
    for kind in ModelKind::NEURAL {
        let mut m = toy(kind);
        let r = model_gradcheck(m.as_mut(), 3);
        assert!(r.passed(), "{kind}: {r:?}");
        assert!(r.checked > 0);
    }
}

#[test]
fn rows_are_independent_and_forward_is_deterministic() {
    for kind in ModelKind::NEURAL {
        let m = toy(kind);
        let l = m.lookback();
        let x = uniform(9, 3 * l);
        let a = m.predict(&x).unwrap();
        assert_eq!(a, m.predict(&x).unwrap(), "{kind} not deterministic");
        let mut y = x.clone();
        for v in &mut y[l..2 * l] {
            *v = 1.0 - *v;
        }
        let b = m.predict(&y).unwrap();
        let h = m.horizon();
        assert_eq!(a[..h], b[..h], "{kind}: row 0 moved");
        assert_eq!(a[2 * h..], b[2 * h..], "{kind}: row 2 moved");
        assert_ne!(a[h..2 * h], b[h..2 * h], "{kind}: row 1 ignored its input");
    }
}

#[test]
fn identical_rows_give_identical_outputs() {
    for kind in ModelKind::NEURAL {
        let m = toy(kind);
        let row = uniform(5, m.lookback());
        let out = m.predict(&[row.clone(), row].concat()).unwrap();
        let h = m.horizon();
        assert_eq!(out[..h], out[h..], "{kind}");
    }
}

#[test]
fn default_models_give_finite_output_on_unit_interval() {
    for kind in ModelKind::NEURAL {
        let m = build_model(kind, 64, 16, 1).unwrap();
        let out = m.predict(&uniform(2, 2 * 64)).unwrap();
        assert_eq!(out.len(), 32);
        assert!(out.iter().all(|v| v.is_finite()), "{kind}");
    }
}

#[test]
fn wrong_batch_width_is_a_dimension_error() {
    for kind in ModelKind::NEURAL {
        let m = toy(kind);
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[2, m.lookback() + 1]));
        let err = m.forward(&mut g, x).unwrap_err();
        assert!(matches!(err, hrbench_core::Error::Dimension(_)), "{kind}: {err}");
    }
}

#[test]
fn parameter_order_is_stable_and_reset_is_seeded() {
    for kind in ModelKind::NEURAL {
        let a = build_model(kind, 64, 16, 5).unwrap();
        let b = build_model(kind, 64, 16, 5).unwrap();
        let c = build_model(kind, 64, 16, 6).unwrap();
        let names =
            |m: &dyn ForecastModel| m.params().ids().map(|i| m.params().name(i).to_string()).collect::<Vec<_>>();
        assert_eq!(names(a.as_ref()), names(b.as_ref()));
        assert_eq!(a.params().flat_values(), b.params().flat_values(), "{kind}");
        assert_ne!(a.params().flat_values(), c.params().flat_values(), "{kind}");
    }
}

#[test]
fn glorot_bound_for_square_64() {
    let bound = Init::glorot_bound(64, 64);
    assert!((bound - (6.0f64 / 128.0).sqrt()).abs() < 1e-15);
    assert!((bound - 0.2165).abs() < 1e-4);
    // iTransformer's attention projections are 64×64 under defaults.
    let m = build_model(ModelKind::ITransformer, 64, 16, 3).unwrap();
    let store = m.params();
    let q = store.ids().find(|&i| store.name(i).ends_with(".q.weight")).expect("a query projection");
    assert_eq!(store.get(q).shape(), &[64, 64]);
    assert!(store.get(q).data().iter().all(|w| w.abs() <= bound));
}

#[test]
fn lstm_forget_gate_bias_is_one() {
    let m = build_model(ModelKind::Lstm, 64, 16, 4).unwrap();
    let store = m.params();
    for layer in 0..3 {
        let b = store.get(store.find(&format!("lstm{layer}.bias")).unwrap()).data();
        assert_eq!(b.len(), 128);
        assert!(b[32..64].iter().all(|&v| v == 1.0));
        assert!(b[..32].iter().chain(&b[64..]).all(|&v| v == 0.0));
    }
}

fn zero_all_but(model: &mut dyn ForecastModel, keep: &str) -> Vec<f64> {
    let store = model.params_mut();
    let ids: Vec<_> = store.ids().collect();
    let mut kept = Vec::new();
    for id in ids {
        if store.name(id) == keep {
            for (i, v) in store.get_mut(id).data_mut().iter_mut().enumerate() {
                *v = 0.25 + i as f64;
            }
            kept = store.get(id).data().to_vec();
        } else if !store.name(id).ends_with(".gamma") {
            store.get_mut(id).data_mut().fill(0.0);
        }
    }
    kept
}

#[test]
fn lstm_with_zero_weights_outputs_head_bias() {
    let mut m = Lstm::new(LstmConfig::default(), 16, 3).unwrap();
    let bias = zero_all_but(&mut m, "head.bias");
    let out = m.predict(&uniform(1, 2 * 16)).unwrap();
    assert_eq!(out[..3], bias[..]);
    assert_eq!(out[3..], bias[..]);
}

#[test]
fn tcn_with_zero_convs_and_head_outputs_head_bias() {
    let mut m = Tcn::new(TcnConfig::default(), 64, 4).unwrap();
    let bias = zero_all_but(&mut m, "head.bias");
    let out = m.predict(&uniform(2, 64)).unwrap();
    assert_eq!(out, bias);
}

#[test]
fn tsmixer_with_zero_weights_outputs_head_bias_plus_window_level() {
    let mut m = TsMixer::new(TsMixerConfig::default(), 64, 4).unwrap();
    let bias = zero_all_but(&mut m, "head.bias");
    assert_eq!(m.predict(&[0.0; 64]).unwrap(), bias);
    let shifted = m.predict(&[0.5; 64]).unwrap();
    for (o, b) in shifted.iter().zip(&bias) {
        assert!((o - (b + 0.5)).abs() < 1e-12);
    }
}

#[test]
fn tsmixer_time_mixing_is_order_sensitive() {
    let m = build_model(ModelKind::TsMixer, 64, 16, 4).unwrap();
    let x = uniform(7, 64);
    let mut rev = x.clone();
    rev.reverse();
    assert_ne!(m.predict(&x).unwrap(), m.predict(&rev).unwrap());
}

#[test]
fn tcn_output_ignores_inputs_outside_receptive_field() {
    let cfg = TcnConfig { blocks: 2, kernel: 3, dilation_base: 2, channels: 4 };
    let rf = cfg.receptive_field();
    assert_eq!(rf, 13);
    let mut m = Tcn::new(cfg, 32, 2).unwrap();
    m.reset(2);
    let x = uniform(8, 32);
    let base = m.predict(&x).unwrap();
    let mut far = x.clone();
    for v in &mut far[..32 - rf] {
        *v += 5.0;
    }
    assert_eq!(m.predict(&far).unwrap(), base);
    let mut near = x;
    near[31] += 0.5;
    assert_ne!(m.predict(&near).unwrap(), base);
}

#[test]
fn tcn_default_receptive_field_covers_lookback() {
    let cfg = TcnConfig::default();
    assert_eq!((0..5).map(|i| cfg.dilation(i)).collect::<Vec<_>>(), vec![1, 2, 4, 8, 16]);
    assert!(cfg.receptive_field() >= 64);
}

fn sine(period: f64, n: usize) -> Vec<f64> {
    (0..n).map(|t| 0.5 + 0.4 * (std::f64::consts::TAU * t as f64 / period).sin()).collect()
}

#[test]
fn timesnet_finds_period_16_in_sine() {
    let sel = select_periods(&sine(16.0, 64), 3).unwrap();
    assert_eq!(sel.periods[0], 16);
    let total: f64 = sel.weights.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn timesnet_recovers_three_planted_periods() {
    let n = 192;
    let x: Vec<f64> = (0..n)
        .map(|t| {
            let t = t as f64;
            [8.0, 16.0, 24.0].iter().map(|p| (std::f64::consts::TAU * t / p).sin()).sum::<f64>()
        })
        .collect();
    let mut periods = select_periods(&x, 3).unwrap().periods;
    periods.sort();
    assert_eq!(periods, vec![8, 16, 24]);
}

#[test]
fn timesnet_constant_window_is_well_defined() {
    let mut m = TimesNet::new(TimesNetConfig { top_k_periods: 1, ..TimesNetConfig::default() }, 64, 16).unwrap();
    m.reset(1);
    let out = m.predict(&[0.3; 64]).unwrap();
    assert!(out.iter().all(|v| v.is_finite()));
}

#[test]
fn timesnet_branch_weights_sum_to_one() {
    let m = build_model(ModelKind::TimesNet, 64, 16, 2).unwrap();
    let mut g = Graph::new();
    let x = g.constant(Tensor::new(&[3, 64], uniform(6, 192)).unwrap());
    m.forward(&mut g, x).unwrap();
    let tagged: Vec<_> = g.tagged(BRANCH_WEIGHT_TAG).collect();
    assert!(!tagged.is_empty());
    for v in tagged {
        let k = *g.shape(v).last().unwrap();
        for row in g.value(v).data().chunks(k) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_rows_sum_to_one_in_every_layer() {
    for (kind, layers) in [(ModelKind::PatchTst, 6), (ModelKind::ITransformer, 8)] {
        let m = build_model(kind, 64, 16, 8).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(&[2, 64], uniform(4, 128)).unwrap());
        m.forward(&mut g, x).unwrap();
        let tagged: Vec<_> = g.tagged(ATTENTION_TAG).collect();
        assert_eq!(tagged.len(), layers, "{kind}");
        for v in tagged {
            let k = *g.shape(v).last().unwrap();
            for row in g.value(v).data().chunks(k) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{kind}");
            }
        }
    }
}

#[test]
fn patchtst_token_counts() {
    let cfg = PatchTstConfig::default();
    assert_eq!(cfg.n_patches(72), 6);
    assert_eq!(cfg.n_patches(64), 6);
    assert_eq!(cfg.n_patches(12), 1);
    assert_eq!(PatchTst::new(cfg, 64, 16).unwrap().n_tokens(), 6);
}

#[test]
fn patchtst_rejects_heads_not_dividing_width() {
    let cfg = PatchTstConfig { d_model: 10, n_heads: 4, ..PatchTstConfig::default() };
    assert!(PatchTst::new(cfg, 64, 16).is_err());
}

#[test]
fn itransformer_single_channel_is_well_defined() {
    let cfg = ITransformerConfig { variate_channels: 1, ..ITransformerConfig::default() };
    let mut m = ITransformer::new(cfg, 64, 16).unwrap();
    m.reset(3);
    assert_eq!(m.n_tokens(), 1);
    let mut g = Graph::new();
    let x = g.constant(Tensor::new(&[2, 64], uniform(1, 128)).unwrap());
    let y = m.forward(&mut g, x).unwrap();
    assert!(g.value(y).is_finite());
    for v in g.tagged(ATTENTION_TAG) {
        assert!(g.value(v).data().iter().all(|&w| w == 1.0));
    }
}

#[test]
fn itransformer_rejects_zero_channels() {
    let cfg = ITransformerConfig { variate_channels: 0, ..ITransformerConfig::default() };
    assert!(ITransformer::new(cfg, 64, 16).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn itransformer_token_count_matches_channels(l in 2usize..40, c in 1usize..=3) {
        let cfg = ITransformerConfig { variate_channels: c, d_model: 8, n_heads: 2, ..ITransformerConfig::default() };
        prop_assert_eq!(ITransformer::new(cfg, l, 2).unwrap().n_tokens(), c);
    }

    #[test]
    fn patch_count_is_ceiling_division(l in 12usize..200) {
        prop_assert_eq!(PatchTstConfig::default().n_patches(l), l.div_ceil(12));
    }
}

#[test]
fn checkpoint_round_trip_restores_parameters() {
    for kind in ModelKind::NEURAL {
        let m = toy(kind);
        let mut bytes = Vec::new();
        write_checkpoint(m.as_ref(), &mut bytes).unwrap();
        let mut other = m.box_clone();
        other.reset(999);
        read_checkpoint(other.as_mut(), bytes.as_slice()).unwrap();
        assert_eq!(other.params().flat_values(), m.params().flat_values());
        let corrupt = &bytes[..bytes.len() - 8];
        assert!(read_checkpoint(other.as_mut(), corrupt).is_err());
    }
}

#[test]
fn checkpoint_for_another_architecture_is_rejected() {
    let a = toy(ModelKind::Lstm);
    let mut bytes = Vec::new();
    write_checkpoint(a.as_ref(), &mut bytes).unwrap();
    let mut b = toy(ModelKind::Tcn);
    assert!(read_checkpoint(b.as_mut(), bytes.as_slice()).is_err());
}

#[test]
fn one_adam_step_lowers_training_batch_loss() {
    let series = synth_series(1, 600, SynthProfile::QuasiPeriodic).unwrap();
    let v = series.values();
    let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let z: Vec<f64> = v.iter().map(|x| (x - lo) / (hi - lo)).collect();
    let data = make_windows(&z, WindowGeometry::new(64, 16, 1).unwrap()).unwrap();
    let idx: Vec<usize> = (0..32).map(|i| i * 13).collect();
    let x = data.gather_inputs(&idx);
    let y = data.gather_targets(&idx);
    let cfg = TrainConfig::default();
    for kind in ModelKind::NEURAL {
        let mut m = build_model(kind, 64, 16, 0).unwrap();
        let before = hrbench_core::train::batch_gradient(m.as_mut(), &data, &idx).unwrap();
        assert!((before - loss_of(m.as_ref(), &x, &y)).abs() < 1e-12);
        AdamState::new(m.as_ref()).step(m.as_mut(), &cfg).unwrap();
        let after = loss_of(m.as_ref(), &x, &y);
        assert!(after < before, "{kind}: {before} -> {after}");
    }
}
