//! Shared inputs for the benchmarks.

use aptrigger::corpus::Sample;
use aptrigger::model::{InputEncoder, Pooling, PosMode, RecurrentConfig, RecurrentModel, Vocab};
use aptrigger::synthetic::{generate, random_vectors, SyntheticConfig};
use aptrigger::Rng;

pub struct Workload {
    pub samples: Vec<Sample>,
    pub vocab: Vocab,
    pub pos_vocab: Vocab,
}

/// A small synthetic training set.
pub fn workload(n: usize) -> Workload {
    let task = generate(&SyntheticConfig {
        train: n,
        dev: 2,
        test: 2,
        ..Default::default()
    })
    .expect("valid config");
    let vocab = Vocab::build(task.train.iter().map(|s| s.tokens.as_slice()), 1).expect("nonempty");
    let pos_vocab = Vocab::build(task.train.iter().map(|s| s.pos.as_slice()), 1).expect("nonempty");
    Workload {
        samples: task.train,
        vocab,
        pos_vocab,
    }
}

pub fn recurrent(w: &Workload, pooling: Pooling, hidden: usize, dim: usize) -> RecurrentModel {
    let mut rng = Rng::new(7);
    let table = random_vectors(&w.vocab, dim, 0.5, &mut rng);
    let encoder = InputEncoder::new(
        w.vocab.clone(),
        w.pos_vocab.clone(),
        PosMode::learned(),
        dim,
    );
    let cfg = RecurrentConfig {
        hidden,
        ..Default::default()
    };
    RecurrentModel::new(pooling, cfg, encoder, table, &mut rng).expect("valid model")
}
