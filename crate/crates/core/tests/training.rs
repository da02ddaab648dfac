use aptrigger::corpus::Sample;
use aptrigger::model::{
    Classifier, InputEncoder, LogRegConfig, LogRegModel, MfcModel, Pooling, PosMode,
    RecurrentConfig, RecurrentModel, Vocab,
};
use aptrigger::synthetic::{generate, random_vectors, SyntheticConfig};
use aptrigger::train::{accuracy, train, TrainConfig};
use aptrigger::{Error, Rng};

fn wp(train_set: &[Sample], hidden: usize, seed: u64) -> RecurrentModel {
    let vocab = Vocab::build(train_set.iter().map(|s| s.tokens.as_slice()), 1).unwrap();
    let pos = Vocab::build(train_set.iter().map(|s| s.pos.as_slice()), 1).unwrap();
    let mut rng = Rng::new(seed);
    let table = random_vectors(&vocab, 20, 0.5, &mut rng);
    let cfg = RecurrentConfig {
        hidden,
        ..Default::default()
    };
    RecurrentModel::new(
        Pooling::Attention,
        cfg,
        InputEncoder::new(vocab, pos, PosMode::learned(), 20),
        table,
        &mut rng,
    )
    .unwrap()
}

fn small_task() -> aptrigger::synthetic::SyntheticTask {
    generate(&SyntheticConfig {
        train: 32,
        dev: 32,
        test: 32,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn overfits_32_samples() {
    let task = small_task();
    let mut m = wp(&task.train, 16, 0);
    let cfg = TrainConfig {
        max_epochs: 200,
        patience: 200,
        ..Default::default()
    };
    // Selecting on the training subset itself: the kept epoch is the first
    // with perfect training accuracy.
    let out = train(&mut m, &task.train, &task.train, &cfg).unwrap();
    assert_eq!(
        accuracy(&m, &task.train).unwrap(),
        1.0,
        "history {:?}",
        out.history.last()
    );
    assert!(out.best_epoch <= 200);
}

#[test]
fn same_seed_same_history() {
    let task = small_task();
    let cfg = TrainConfig {
        max_epochs: 5,
        ..Default::default()
    };
    let run = || {
        let mut m = wp(&task.train, 4, 1);
        let out = train(&mut m, &task.train, &task.dev, &cfg).unwrap();
        (out.history, m)
    };
    let (h1, m1) = run();
    let (h2, m2) = run();
    assert_eq!(h1, h2);
    assert_eq!(m1, m2);
}

#[test]
fn keeps_best_dev_epoch() {
    let task = small_task();
    let mut m = wp(&task.train, 4, 2);
    let cfg = TrainConfig {
        max_epochs: 25,
        patience: 5,
        ..Default::default()
    };
    let out = train(&mut m, &task.train, &task.dev, &cfg).unwrap();
    let best = out
        .history
        .iter()
        .map(|r| r.dev_accuracy)
        .fold(f64::MIN, f64::max);
    let first_best = out
        .history
        .iter()
        .find(|r| r.dev_accuracy == best)
        .unwrap()
        .epoch;
    assert_eq!(out.best_epoch, first_best);
    assert_eq!(accuracy(&m, &task.dev).unwrap(), best);
    if out.stopped_early {
        assert_eq!(out.history.len(), first_best + cfg.patience);
    }
}

#[test]
fn tiny_learning_rate_moves_parameters_by_that_much() {
    let task = small_task();
    let mut m = wp(&task.train, 4, 3);
    let before = m.params.clone();
    let lr = 1e-9;
    let cfg = TrainConfig {
        max_epochs: 1,
        batch_size: 32,
        clip: None,
        learning_rate: lr,
        ..Default::default()
    };
    train(&mut m, &task.train, &task.dev, &cfg).unwrap();
    // One Adam step moves each scalar by at most lr (up to rounding).
    for (name, p) in before.iter() {
        let after = m.params.value(name).unwrap();
        let moved = p.value.max_abs_diff(after);
        assert!(moved <= lr * (1.0 + 1e-6), "{name} moved {moved}");
        if !p.trainable {
            assert_eq!(moved, 0.0);
        }
    }
}

#[test]
fn non_finite_loss_aborts_with_batch_dump() {
    let task = small_task();
    let mut m = wp(&task.train, 4, 4);
    m.params.value_mut("output.bias").unwrap().data_mut()[0] = f64::NAN;
    let err = train(&mut m, &task.train, &task.dev, &TrainConfig::default()).unwrap_err();
    match err {
        Error::NonFinite(msg) => assert!(msg.contains("@@@@"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn logreg_separates_toy_set() {
    let mk = |t: &str, label: &str| Sample {
        label: label.into(),
        tokens: t.split(' ').map(String::from).collect(),
        pos: t.split(' ').map(|_| "NN".to_string()).collect(),
        section: "0".into(),
    };
    let data = vec![
        mk("x a @@@@ go", "too"),
        mk("a x @@@@ go", "too"),
        mk("x b @@@@ run", "too"),
        mk("y a @@@@ go", "none"),
        mk("a y @@@@ go", "none"),
        mk("y b @@@@ run", "none"),
    ];
    let mut m = LogRegModel::new(LogRegConfig::default(), &data).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        max_epochs: 200,
        patience: 200,
        ..Default::default()
    };
    train(&mut m, &data, &data, &cfg).unwrap();
    assert_eq!(accuracy(&m, &data).unwrap(), 1.0);
}

#[test]
fn mfc_is_half_on_balanced_synthetic() {
    let task = generate(&SyntheticConfig::default()).unwrap();
    let mut m = MfcModel::fit(&task.train).unwrap();
    let out = train(&mut m, &task.train, &task.dev, &TrainConfig::default()).unwrap();
    assert_eq!(out.best_epoch, 0);
    assert_eq!(m.param_count(), 0);
    assert_eq!(accuracy(&m, &task.test).unwrap(), 0.5);
}
