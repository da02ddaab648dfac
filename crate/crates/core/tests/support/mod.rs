//! Shared fixtures: toy vocabularies and models, random samples and the
//! finite-difference gradient oracle.
#![allow(dead_code)]

use aptrigger::corpus::Sample;
use aptrigger::model::{
    Activation, Classifier, EmbeddingTable, InputEncoder, Mode, Pooling, PosMode, RecurrentConfig,
    RecurrentModel, Vocab,
};
use aptrigger::train::batch_loss;
use aptrigger::{ParamStore, Rng, Tape};

pub const STEP: f64 = 1e-5;

pub fn toy_vocab() -> (Vocab, Vocab) {
    let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
    let tags: Vec<String> = ["NN", "VB", "DT", "JJ"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    (
        Vocab::build([words.as_slice()], 1).unwrap(),
        Vocab::build([tags.as_slice()], 1).unwrap(),
    )
}

pub fn random_sample(rng: &mut Rng, len: usize) -> Sample {
    let mut tokens: Vec<String> = (0..len - 1)
        .map(|_| format!("w{}", rng.below(20)))
        .collect();
    let mut pos: Vec<String> = (0..len - 1)
        .map(|_| ["NN", "VB", "DT", "JJ"][rng.below(4)].to_string())
        .collect();
    let m = rng.below(len);
    tokens.insert(m, "@@@@".into());
    pos.insert(m, "@@@@".into());
    Sample {
        label: if rng.below(2) == 0 { "none" } else { "again" }.into(),
        tokens,
        pos,
        section: "0".into(),
    }
}

pub fn loss<C: Classifier>(
    model: &C,
    batch: &[Sample],
    mode: Mode,
    seed: u64,
) -> (Tape, aptrigger::Var) {
    let mut tape = Tape::new();
    let mut rng = Rng::new(seed);
    let probs: Vec<_> = batch
        .iter()
        .map(|s| model.forward(&mut tape, s, mode, &mut rng).unwrap())
        .collect();
    let labels: Vec<usize> = batch.iter().map(Sample::target).collect();
    let (mut l, _) = batch_loss(&mut tape, &probs, &labels).unwrap();
    if let Some(p) = model.penalty(&mut tape).unwrap() {
        l = tape.add(l, p).unwrap();
    }
    (tape, l)
}

pub fn loss_value<C: Classifier>(model: &C, batch: &[Sample], mode: Mode, seed: u64) -> f64 {
    let (tape, l) = loss(model, batch, mode, seed);
    tape.value(l).data()[0]
}

/// Largest relative error over every trainable scalar.
pub fn max_relative_error<C: Classifier + Clone>(model: &C, batch: &[Sample], mode: Mode) -> f64 {
    let (tape, l) = loss(model, batch, mode, 11);
    let grads = tape.backward(l, model.params()).unwrap();
    let names: Vec<String> = model
        .params()
        .trainable()
        .map(|(n, _)| n.to_string())
        .collect();
    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for name in names {
        let analytic = grads.get(&name).unwrap().clone();
        for i in 0..analytic.len() {
            let original = probe.params().value(&name).unwrap().data()[i];
            set(probe.params_mut(), &name, i, original + STEP);
            let up = loss_value(&probe, batch, mode, 11);
            set(probe.params_mut(), &name, i, original - STEP);
            let down = loss_value(&probe, batch, mode, 11);
            set(probe.params_mut(), &name, i, original);
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

pub fn set(store: &mut ParamStore, name: &str, i: usize, v: f64) {
    store.value_mut(name).unwrap().data_mut()[i] = v;
}

pub fn recurrent(
    pooling: Pooling,
    pos: PosMode,
    activation: Activation,
    seed: u64,
) -> RecurrentModel {
    let (vocab, pos_vocab) = toy_vocab();
    let mut rng = Rng::new(seed);
    let table = EmbeddingTable::random(&vocab, 6, &mut rng);
    let cfg = RecurrentConfig {
        hidden: 4,
        dense: 8,
        activation,
        ..Default::default()
    };
    let mut m = RecurrentModel::new(
        pooling,
        cfg,
        InputEncoder::new(vocab, pos_vocab, pos, 6),
        table,
        &mut rng,
    )
    .unwrap();
    // Larger weights than the default init so every gradient is well away
    // from zero.
    let names: Vec<String> = m.params.trainable().map(|(n, _)| n.to_string()).collect();
    for n in names {
        for v in m.params.value_mut(&n).unwrap().data_mut() {
            *v = rng.uniform_range(-0.5, 0.5);
        }
    }
    m
}

/// A recurrent model at the default initialisation.
pub fn toy_model(
    pooling: Pooling,
    hidden: usize,
    dim: usize,
    pos: PosMode,
    seed: u64,
) -> RecurrentModel {
    let (vocab, pos_vocab) = toy_vocab();
    let mut rng = Rng::new(seed);
    let table = EmbeddingTable::random(&vocab, dim, &mut rng);
    let cfg = RecurrentConfig {
        hidden,
        ..Default::default()
    };
    RecurrentModel::new(
        pooling,
        cfg,
        InputEncoder::new(vocab, pos_vocab, pos, dim),
        table,
        &mut rng,
    )
    .unwrap()
}

/// Gradient cases over both poolings; returns the case count and the worst
/// relative error.
pub fn recurrent_oracle(seeds: std::ops::Range<u64>) -> (usize, f64) {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for seed in seeds {
        for pooling in [Pooling::Attention, Pooling::Mean] {
            let m = recurrent(pooling, PosMode::Off, Activation::Tanh, seed);
            let mut rng = Rng::new(100 + seed);
            let batch: Vec<Sample> = (0..2).map(|_| random_sample(&mut rng, 5)).collect();
            worst = worst.max(max_relative_error(&m, &batch, Mode::Eval));
            cases += 1;
        }
    }
    (cases, worst)
}
