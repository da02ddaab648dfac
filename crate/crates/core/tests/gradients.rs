//! Reverse-mode gradients against central finite differences.

mod support;

use aptrigger::corpus::Sample;
use aptrigger::model::{
    Activation, CnnConfig, CnnModel, EmbeddingTable, InputEncoder, LogRegConfig, LogRegModel, Mode,
    Pooling, PosMode,
};
use aptrigger::Rng;
use support::{max_relative_error, random_sample, recurrent, recurrent_oracle, toy_vocab};

#[test]
fn recurrent_gradients_match_finite_differences() {
    let (cases, worst) = recurrent_oracle(0..12);
    assert!(cases >= 20);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn relu_pos_and_dropout_paths() {
    let mut worst = 0.0f64;
    for (seed, pos) in [
        (1, PosMode::OneHot),
        (2, PosMode::Learned { dim: 3 }),
        (3, PosMode::Off),
    ] {
        let m = recurrent(Pooling::Attention, pos, Activation::Relu, seed);
        let mut rng = Rng::new(seed);
        let batch: Vec<Sample> = (0..2).map(|_| random_sample(&mut rng, 5)).collect();
        worst = worst.max(max_relative_error(&m, &batch, Mode::Train { dropout: 0.3 }));
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn cnn_gradients_match_finite_differences() {
    let (vocab, pos_vocab) = toy_vocab();
    let mut rng = Rng::new(4);
    let table = EmbeddingTable::random(&vocab, 3, &mut rng);
    let cfg = CnnConfig {
        widths: vec![2, 3],
        filters: 3,
        pad_to: 6,
    };
    let mut m = CnnModel::new(
        cfg,
        InputEncoder::new(vocab, pos_vocab, PosMode::Off, 3),
        table,
        &mut rng,
    )
    .unwrap();
    for b in ["conv2.bias", "conv3.bias"] {
        m.params.value_mut(b).unwrap().data_mut().fill(0.3);
    }
    let batch: Vec<Sample> = (0..2).map(|_| random_sample(&mut rng, 5)).collect();
    let worst = max_relative_error(&m, &batch, Mode::Eval);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn logreg_gradients_match_finite_differences() {
    let mut rng = Rng::new(5);
    let train: Vec<Sample> = (0..6).map(|_| random_sample(&mut rng, 4)).collect();
    let mut m = LogRegModel::new(LogRegConfig::default(), &train).unwrap();
    for v in m.params.value_mut("logreg.weight").unwrap().data_mut() {
        *v = rng.uniform_range(-0.5, 0.5);
    }
    let worst = max_relative_error(&m, &train[..3], Mode::Eval);
    assert!(worst < 1e-4, "max relative error {worst}");
}
