mod common;

use common::rng;
use mgmu::models::{Classifier, Mode};
use mgmu::nn::{Bound, Dense, ModelParams};
use mgmu::train::{
    class_weights, evaluate_loss, grid_search, train, write_grid_csv, Adam, EarlyStop, Event, Example, GridSpec,
    PlateauScheduler, TrainConfig, TrainLog,
};
use mgmu::{Error, Result, Tape, Tensor, Var};
use rand::Rng;

#[test]
fn class_weight_examples() {
    assert_eq!(class_weights(&[10, 10, 10]).unwrap().data(), &[1.0, 1.0, 1.0]);
    let w = class_weights(&[54, 56, 30]).unwrap();
    for (got, want) in w.data().iter().zip([0.8642, 0.8333, 1.5556]) {
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }
    let n: f64 = w.data().iter().zip([54.0, 56.0, 30.0]).map(|(w, c)| w * c).sum();
    assert!((n - 140.0).abs() < 1e-12);
    assert!(class_weights(&[3, 0, 2]).is_err());
}

#[test]
fn uniform_weights_equal_unweighted_loss() {
    let tape = Tape::new();
    let logits = tape.leaf(Tensor::vector(vec![0.3, -1.2, 2.0]));
    let a = tape.weighted_cross_entropy(logits, 1, &class_weights(&[7, 7, 7]).unwrap()).unwrap();
    let b = tape.weighted_cross_entropy(logits, 1, &Tensor::full(&[3], 1.0)).unwrap();
    assert_eq!(a.to_tensor().item(), b.to_tensor().item());
}

fn scalar_params(v: f64) -> ModelParams {
    let mut p = ModelParams::new();
    p.add("theta", Tensor::vector(vec![v]));
    p
}

fn set_grad(p: &mut ModelParams, g: f64) {
    let tape = Tape::new();
    let b = p.bind(&tape);
    let id = p.id("theta").unwrap();
    let loss = b[id].scale(g).sum();
    tape.backward(loss).unwrap();
    p.zero_grad();
    p.accumulate_grads(&tape, &b);
}

#[test]
fn adam_first_step_and_zero_gradient() {
    let mut p = scalar_params(0.0);
    let mut adam = Adam::default();
    set_grad(&mut p, 1.0);
    adam.step(&mut p, 1e-3).unwrap();
    let theta = p.by_name("theta").unwrap().data()[0];
    assert!((theta + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15, "{theta}");

    let mut p = scalar_params(0.25);
    let mut adam = Adam::default();
    for _ in 0..10 {
        set_grad(&mut p, 0.0);
        adam.step(&mut p, 1e-3).unwrap();
    }
    assert_eq!(p.by_name("theta").unwrap().data(), &[0.25]);
}

#[test]
fn adam_rejects_non_finite_gradient_by_name() {
    let mut p = ModelParams::new();
    p.add("ok", Tensor::vector(vec![1.0]));
    p.add("head.w", Tensor::vector(vec![1.0]));
    let tape = Tape::new();
    let b = p.bind(&tape);
    let loss = b[p.id("head.w").unwrap()].scale(f64::NAN).add(b[p.id("ok").unwrap()]).unwrap().sum();
    tape.backward(loss).unwrap();
    p.accumulate_grads(&tape, &b);
    match Adam::default().step(&mut p, 1e-3) {
        Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "head.w"),
        other => panic!("{other:?}"),
    }
    assert_eq!(p.by_name("ok").unwrap().data(), &[1.0]);
}

#[test]
fn plateau_traces() {
    let mut s = PlateauScheduler::new(1e-3, 25, 0.5);
    for e in 0..100 {
        assert_eq!(s.observe(e, 100.0 - e as f64), None);
    }
    assert_eq!(s.lr(), 1e-3);

    let mut s = PlateauScheduler::new(1e-3, 25, 0.5);
    let mut drops = Vec::new();
    let mut lrs = Vec::new();
    for e in 0..60 {
        if let Some(lr) = s.observe(e, 1.0) {
            drops.push((e, lr));
        }
        lrs.push(s.lr());
    }
    assert_eq!(drops, vec![(25, 5e-4), (50, 2.5e-4)]);
    assert_eq!(s.lr(), 0.25 * 1e-3);
    assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn early_stop_traces() {
    let mut s = EarlyStop::new(50);
    for e in 0..300 {
        assert!(!s.observe(e, -(e as f64)).1);
    }
    let mut s = EarlyStop::new(50);
    let losses = [5.0, 4.0, 3.0, 2.0];
    let mut stopped = None;
    for e in 0..300 {
        let l = if e < 4 { losses[e] } else { 2.0 };
        if s.observe(e, l).1 {
            stopped = Some(e);
            break;
        }
    }
    assert_eq!(stopped, Some(53));
    assert_eq!(s.best_epoch(), 3);
}

/// A linear classifier used as a training fixture.
struct Linear {
    layer: Dense,
}

impl Classifier for Linear {
    type Input = Tensor;

    fn logits<'t>(&self, _tape: &'t Tape, p: &Bound<'t>, x: &Tensor, _mode: &mut Mode<'_>) -> Result<Var<'t>> {
        self.layer.forward(p, _tape.leaf(x.clone()))
    }
}

fn linear(seed: u64) -> (Linear, ModelParams) {
    let mut params = ModelParams::new();
    let layer = Dense::new(&mut params, "fc", 2, 3, &mut rng(seed));
    (Linear { layer }, params)
}

/// Three well separated blobs; one subject per example.
fn toy(prefix: &str, n: usize, seed: u64) -> Vec<Example<Tensor>> {
    let centres = [[2.0, 0.0], [-1.0, 1.7], [-1.0, -1.7]];
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let c = i % 3;
            let x = vec![centres[c][0] + r.random_range(-0.3..0.3), centres[c][1] + r.random_range(-0.3..0.3)];
            Example { input: Tensor::vector(x), label: c, subject: format!("{prefix}{i}") }
        })
        .collect()
}

fn short_config(epochs: usize) -> TrainConfig {
    TrainConfig { max_epochs: epochs, lr: 1e-2, seed: 5, ..TrainConfig::default() }
}

#[test]
fn training_halves_loss_on_separable_toy() {
    let (model, mut params) = linear(1);
    let tr = toy("t", 30, 2);
    let va = toy("v", 9, 3);
    let w = Tensor::full(&[3], 1.0);
    let initial = evaluate_loss(&model, &params, &tr).unwrap();
    let out = train(&model, &mut params, &tr, &va, &w, &short_config(50)).unwrap();
    let after = out.log.epochs.last().unwrap().train_loss;
    assert!(after < initial / 2.0, "{initial} -> {after}");
}

#[test]
fn training_is_deterministic_and_restores_best() {
    let tr = toy("t", 30, 2);
    let va = toy("v", 9, 3);
    let w = class_weights(&[10, 10, 10]).unwrap();
    let run = || {
        let (model, mut params) = linear(1);
        let out = train(&model, &mut params, &tr, &va, &w, &short_config(40)).unwrap();
        let restored = evaluate_loss(&model, &params, &va).unwrap();
        (out, params, restored)
    };
    let (a, pa, restored) = run();
    let (b, pb, _) = run();
    assert!(a.log.same_trajectory(&b.log));
    assert_eq!(pa.by_name("fc.w"), pb.by_name("fc.w"));
    let best = a.log.best_epoch().unwrap();
    assert_eq!(best.epoch, a.best_epoch);
    let min = a.log.epochs.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(best.val_loss, min);
    assert!((restored - best.val_loss).abs() < 1e-12);
    let lrs: Vec<f64> = a.log.epochs.iter().map(|r| r.lr).collect();
    assert!(lrs.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] * 0.5));
}

#[test]
fn early_stop_event_and_jsonl_roundtrip() {
    let (model, mut params) = linear(1);
    let tr = toy("t", 12, 2);
    // Validation labels disagree with training, so validation loss soon rises.
    let mut va = toy("v", 6, 3);
    va.iter_mut().for_each(|e| e.label = (e.label + 1) % 3);
    let cfg = TrainConfig { max_epochs: 300, lr: 0.5, lr_patience: 2, early_stop_patience: 4, seed: 1, ..TrainConfig::default() };
    let out = train(&model, &mut params, &tr, &va, &Tensor::full(&[3], 1.0), &cfg).unwrap();
    assert!(out.log.stopped_early());
    assert_eq!(out.log.epochs.len(), out.best_epoch + 4 + 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    out.log.write_jsonl(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), out.log.epochs.len());
    let back = TrainLog::read_jsonl(&path).unwrap();
    assert!(back.same_trajectory(&out.log));
    assert!(back.epochs.last().unwrap().events.contains(&Event::EarlyStop));
}

#[test]
fn training_refuses_leaking_splits() {
    let (model, mut params) = linear(1);
    let tr = toy("s", 6, 2);
    let mut va = toy("v", 3, 3);
    va[1].subject = "s4".into();
    match train(&model, &mut params, &tr, &va, &Tensor::full(&[3], 1.0), &short_config(2)) {
        Err(Error::Leakage(msg)) => assert!(msg.contains("s4"), "{msg}"),
        other => panic!("{:?}", other.map(|o| o.best_epoch)),
    }
}

#[test]
fn grid_sizes_and_singleton() {
    let full = GridSpec::default();
    assert_eq!(full.cells().len(), 243);
    assert_eq!(full.without_segments().cells().len(), 81);
    let single = GridSpec {
        lr: vec![1e-3],
        lr_patience: vec![25],
        early_stop: vec![50],
        factor: vec![0.5],
        segment_seconds: vec![],
    };
    let rows = grid_search(&single, &TrainConfig::default(), |_, _| Ok((0.3, 1.0))).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].rank, 1);
    let empty = GridSpec { lr: vec![], ..single };
    assert!(grid_search(&empty, &TrainConfig::default(), |_, _| Ok((0.0, 0.0))).is_err());
}

#[test]
fn grid_ranking_on_toy_is_reproducible() {
    let tr = toy("t", 30, 2);
    let va = toy("v", 9, 3);
    let spec = GridSpec {
        lr: vec![1e-3, 5e-4, 1e-4],
        lr_patience: vec![25],
        early_stop: vec![50],
        factor: vec![0.5],
        segment_seconds: vec![],
    };
    let base = TrainConfig { max_epochs: 10, seed: 3, ..TrainConfig::default() };
    let run = || {
        grid_search(&spec, &base, |_, cfg| {
            let (model, mut params) = linear(1);
            let out = train(&model, &mut params, &tr, &va, &Tensor::full(&[3], 1.0), cfg)?;
            let probs = mgmu::train::predict_all(&model, &params, &va)?;
            let pred: Vec<usize> = probs.iter().map(|p| mgmu::metrics::argmax(p)).collect();
            let truth: Vec<usize> = va.iter().map(|e| e.label).collect();
            let m = mgmu::metrics::confusion(&truth, &pred, 3)?;
            Ok((mgmu::metrics::weighted_f1(&m)?.1, out.best_val_loss))
        })
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    // Ties in F1 fall back to lower loss: larger steps learn faster here.
    assert_eq!(a[0].cell.lr, 1e-3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    write_grid_csv(&a, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
}
