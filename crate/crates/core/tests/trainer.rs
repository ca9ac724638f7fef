use hrbench_core::dataset::{make_folds, make_windows, synth_series, NormalizationMode, SynthProfile, WindowGeometry};
use hrbench_core::models::lstm::{Lstm, LstmConfig};
use hrbench_core::models::{build_model, ForecastModel, ModelKind};
use hrbench_core::train::{
    adam_update, cross_validate, dataset_loss, epoch_order, prepare_fold, train_fold, AdamState, TrainConfig, TrainLog,
};
use hrbench_core::Error;
use proptest::prelude::*;

/// Textbook Adam on one scalar, replaying every step from zero moments.
fn adam_oracle(grads: &[f64], cfg: &TrainConfig) -> f64 {
    let (mut theta, mut m, mut v) = (0.0, 0.0, 0.0);
    for (k, &g) in grads.iter().enumerate() {
        let t = (k + 1) as f64;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        let mh = m / (1.0 - cfg.beta1.powf(t));
        let vh = v / (1.0 - cfg.beta2.powf(t));
        theta -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
    }
    theta
}

fn run_adam(grads: &[f64], cfg: &TrainConfig) -> f64 {
    let (mut theta, mut m, mut v) = ([0.0], [0.0], [0.0]);
    for (k, &g) in grads.iter().enumerate() {
        adam_update(&mut theta, &[g], &mut m, &mut v, k as u64 + 1, cfg);
    }
    theta[0]
}

#[test]
fn adam_single_step_closed_form() {
    let cfg = TrainConfig::default();
    let theta = run_adam(&[1.0], &cfg);
    assert!((theta - (-cfg.lr / (1.0 + cfg.eps))).abs() < 1e-12);
    assert!((theta + 9.99999e-4).abs() < 1e-9);
}

#[test]
fn adam_two_constant_steps_move_two_learning_rates() {
    let cfg = TrainConfig::default();
    let theta = run_adam(&[1.0, 1.0], &cfg);
    assert!((theta - (-2.0 * cfg.lr / (1.0 + cfg.eps))).abs() < 1e-12);
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let cfg = TrainConfig::default();
    let mut m = build_model(ModelKind::Lstm, 16, 4, 1).unwrap();
    let before = m.params().flat_values();
    let mut state = AdamState::new(m.as_ref());
    m.params_mut().zero_grad();
    state.step(m.as_mut(), &cfg).unwrap();
    state.step(m.as_mut(), &cfg).unwrap();
    assert_eq!(state.t, 2);
    assert_eq!(m.params().flat_values(), before);
}

#[test]
fn adam_rejects_non_finite_gradient_naming_parameter() {
    let mut m = Lstm::new(LstmConfig { layers: 1, hidden: 2 }, 4, 1).unwrap();
    let id = m.params().find("head.weight").unwrap();
    let t = m.params_mut().get_mut(id);
    let mut g = vec![0.0; t.len()];
    g[0] = f64::NAN;
    t.grad = Some(g);
    let mut state = AdamState::new(&m);
    let err = state.step(&mut m, &TrainConfig::default()).unwrap_err();
    assert!(matches!(&err, Error::Divergence(msg) if msg.contains("head.weight")), "{err}");
    assert_eq!(state.t, 0);
}

#[test]
fn zero_learning_rate_never_moves_parameters() {
    let cfg = TrainConfig { lr: 0.0, ..TrainConfig::default() };
    let mut theta = [0.3, -1.2];
    let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
    for t in 1..=50 {
        adam_update(&mut theta, &[0.7, -2.0], &mut m, &mut v, t, &cfg);
    }
    assert_eq!(theta, [0.3, -1.2]);
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    for bad in [
        TrainConfig { epochs: 0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { beta1: 1.0, ..TrainConfig::default() },
        TrainConfig { beta2: -0.1, ..TrainConfig::default() },
        TrainConfig { lr: f64::NAN, ..TrainConfig::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
    }
}

proptest! {
    #[test]
    fn adam_matches_oracle_up_to_five_steps(grads in prop::collection::vec(-10.0f64..10.0, 1..=5)) {
        let cfg = TrainConfig::default();
        prop_assert!((run_adam(&grads, &cfg) - adam_oracle(&grads, &cfg)).abs() < 1e-12);
    }

    #[test]
    fn adam_second_moment_is_nonnegative(grads in prop::collection::vec(-10.0f64..10.0, 1..=8)) {
        let cfg = TrainConfig::default();
        let (mut theta, mut m, mut v) = ([0.0], [0.0], [0.0]);
        for (k, &g) in grads.iter().enumerate() {
            adam_update(&mut theta, &[g], &mut m, &mut v, k as u64 + 1, &cfg);
            prop_assert!(v[0] >= 0.0);
        }
    }

    #[test]
    fn epoch_order_is_a_permutation(n in 1usize..300, seed in any::<u64>(), fold in 0usize..5, epoch in 1usize..300) {
        let mut order = epoch_order(n, seed, fold, epoch);
        prop_assert_eq!(&order, &epoch_order(n, seed, fold, epoch));
        order.sort_unstable();
        prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
    }
}

fn quasi_windows(length: usize) -> (Vec<f64>, WindowGeometry) {
    let s = synth_series(1, length, SynthProfile::QuasiPeriodic).unwrap();
    (s.values().to_vec(), WindowGeometry::new(64, 16, 1).unwrap())
}

#[test]
fn one_epoch_on_constant_data_reduces_loss() {
    let data = make_windows(&[0.5; 200], WindowGeometry::new(16, 4, 1).unwrap()).unwrap();
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut m = build_model(ModelKind::Lstm, 16, 4, 2).unwrap();
    let before = dataset_loss(m.as_ref(), &data, &idx).unwrap();
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let mut log = TrainLog::new(m.as_ref(), 0);
    train_fold(m.as_mut(), &data, &idx, &idx, 0, &cfg, &mut log).unwrap();
    let after = dataset_loss(m.as_ref(), &data, &idx).unwrap();
    assert!(after < before, "{before} -> {after}");
    assert_eq!(log.records.len(), 1);
}

#[test]
fn training_is_bit_identical_for_same_seed() {
    let (values, geom) = quasi_windows(300);
    let folds = make_folds(geom.count(values.len()).unwrap(), 5, geom).unwrap();
    let fold = prepare_fold(&values, &folds[1], geom, NormalizationMode::PerFold, 2).unwrap();
    let cfg = TrainConfig { epochs: 3, seed: 9, ..TrainConfig::default() };
    let run = || {
        let mut m = build_model(ModelKind::Tcn, 64, 16, 9).unwrap();
        let mut log = TrainLog::new(m.as_ref(), 9);
        train_fold(m.as_mut(), &fold.windows, &fold.train_indices, &fold.val_indices, 1, &cfg, &mut log).unwrap();
        (m.params().flat_values(), log.records.iter().map(|r| r.train_loss).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn cross_validation_cardinality_and_mean() {
    let (values, geom) = quasi_windows(300);
    let folds = make_folds(geom.count(values.len()).unwrap(), 5, geom).unwrap();
    let cfg = TrainConfig { epochs: 2, window_stride: 3, ..TrainConfig::default() };
    let factory = |seed: u64| -> hrbench_core::Result<Box<dyn ForecastModel>> {
        let mut m: Box<dyn ForecastModel> = Box::new(Lstm::new(LstmConfig { layers: 1, hidden: 4 }, 64, 16)?);
        m.reset(seed);
        Ok(m)
    };
    let out = cross_validate(&factory, &values, &folds, geom, NormalizationMode::PerFold, &cfg).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.snapshots.len(), 5);
    let losses = out.fold_losses();
    assert_eq!(losses.len(), 5);
    let mean = losses.iter().sum::<f64>() / 5.0;
    assert!((out.mean_val_loss().unwrap() - mean).abs() < 1e-12);
    assert_eq!(out.log.records.len(), 5 * cfg.epochs);
    for (k, snap) in out.snapshots.iter().enumerate() {
        assert_eq!(snap.fold_index, k);
        assert_eq!(out.log.fold_records(k).count(), cfg.epochs);
        assert!(out.log.fold_records(k).all(|r| r.train_loss.is_finite()));
    }
    let csv = out.log.to_csv();
    assert!(csv.starts_with("epoch,fold,train_loss,val_loss,seconds\n"));
    assert_eq!(csv.lines().count(), 1 + 5 * cfg.epochs);
}

#[test]
fn validation_windows_never_train() {
    let (values, geom) = quasi_windows(500);
    let folds = make_folds(geom.count(values.len()).unwrap(), 5, geom).unwrap();
    for f in &folds {
        let fold = prepare_fold(&values, f, geom, NormalizationMode::PerFold, 1).unwrap();
        let val = f.val_time_span(&geom);
        for &i in &fold.train_indices {
            assert!(!f.val_indices.contains(&i));
            let s = geom.window_span(i);
            assert!(s.end <= val.start || s.start >= val.end);
        }
    }
}

#[test]
fn training_loss_falls_by_epoch_fifty_for_every_model() {
    let (values, geom) = quasi_windows(400);
    let folds = make_folds(geom.count(values.len()).unwrap(), 5, geom).unwrap();
    let fold = prepare_fold(&values, &folds[4], geom, NormalizationMode::PerFold, 4).unwrap();
    let cfg = TrainConfig { epochs: 50, seed: 1, ..TrainConfig::default() };
    for kind in ModelKind::NEURAL {
        let mut m = build_model(kind, 64, 16, 1).unwrap();
        let mut log = TrainLog::new(m.as_ref(), 1);
        train_fold(m.as_mut(), &fold.windows, &fold.train_indices, &fold.val_indices, 4, &cfg, &mut log).unwrap();
        assert_eq!(log.records.len(), 50);
        let first = log.records[0].train_loss;
        let last = log.records[49].train_loss;
        assert!(last <= first, "{kind}: epoch 1 {first}, epoch 50 {last}");
    }
}
