//! A generated, balanced stand-in for the trigger task.
//!
//! Every sample is `context @@@@ governor tail`. In positive samples the
//! governor also occurs once somewhere in the context; in negative samples
//! it does not. Nothing else distinguishes the classes.

use serde::{Deserialize, Serialize};

use crate::corpus::{Sample, MARKER, NEGATIVE_LABEL};
use crate::error::{Error, Result};
use crate::model::{EmbeddingTable, Vocab};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const POSITIVE_LABEL: &str = "again";
pub const SECTION: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Distinct content words; governors are drawn from these.
    pub content_words: usize,
    pub filler_words: usize,
    pub min_context: usize,
    pub max_context: usize,
    pub tail: usize,
    /// Chance that a context slot holds a content word rather than filler.
    pub content_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            train: 2000,
            dev: 400,
            test: 400,
            content_words: 10,
            filler_words: 10,
            min_context: 3,
            max_context: 8,
            tail: 2,
            content_rate: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub train: Vec<Sample>,
    pub dev: Vec<Sample>,
    pub test: Vec<Sample>,
}

fn content(i: usize) -> String {
    format!("c{i}")
}

fn filler(i: usize) -> String {
    format!("f{i}")
}

struct Generator<'a> {
    cfg: &'a SyntheticConfig,
    rng: Rng,
}

impl Generator<'_> {
    /// A content word other than `avoid`, or a filler word.
    fn word(&mut self, avoid: usize) -> (String, &'static str) {
        if self.rng.uniform() < self.cfg.content_rate {
            let mut c = self.rng.below(self.cfg.content_words - 1);
            if c >= avoid {
                c += 1;
            }
            (content(c), "NN")
        } else {
            (filler(self.rng.below(self.cfg.filler_words)), "DT")
        }
    }

    fn sample(&mut self, positive: bool) -> Sample {
        let cfg = self.cfg;
        let governor = self.rng.below(cfg.content_words);
        let len = cfg.min_context + self.rng.below(cfg.max_context - cfg.min_context + 1);
        let mut tokens = Vec::with_capacity(len + cfg.tail + 2);
        let mut pos = Vec::with_capacity(len + cfg.tail + 2);
        let repeat_at = positive.then(|| self.rng.below(len));
        for i in 0..len {
            if repeat_at == Some(i) {
                tokens.push(content(governor));
                pos.push("NN".to_string());
            } else {
                let (w, p) = self.word(governor);
                tokens.push(w);
                pos.push(p.to_string());
            }
        }
        tokens.push(MARKER.to_string());
        pos.push(MARKER.to_string());
        tokens.push(content(governor));
        pos.push("VB".to_string());
        for _ in 0..cfg.tail {
            let (w, p) = self.word(governor);
            tokens.push(w);
            pos.push(p.to_string());
        }
        Sample {
            label: if positive {
                POSITIVE_LABEL
            } else {
                NEGATIVE_LABEL
            }
            .to_string(),
            tokens,
            pos,
            section: SECTION.to_string(),
        }
    }

    /// `n` samples, half positive (the odd one out is positive), shuffled.
    fn split(&mut self, n: usize) -> Vec<Sample> {
        let mut out: Vec<Sample> = (0..n).map(|i| self.sample(i % 2 == 0)).collect();
        self.rng.shuffle(&mut out);
        out
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticTask> {
    if cfg.content_words < 2 || cfg.filler_words == 0 {
        return Err(Error::usage(
            "synthetic task needs at least 2 content and 1 filler word",
        ));
    }
    if cfg.min_context == 0 || cfg.min_context > cfg.max_context {
        return Err(Error::usage(
            "synthetic context bounds must satisfy 1 <= min <= max",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.content_rate) {
        return Err(Error::usage("content_rate must lie in [0, 1]"));
    }
    let root = Rng::new(cfg.seed);
    let split = |label: &str, n: usize| {
        Generator {
            cfg,
            rng: root.split(label),
        }
        .split(n)
    };
    Ok(SyntheticTask {
        train: split("synthetic/train", cfg.train),
        dev: split("synthetic/dev", cfg.dev),
        test: split("synthetic/test", cfg.test),
    })
}

/// Frozen random vectors with entries uniform in `[-scale, scale]`; marker
/// and padding rows are zero.
pub fn random_vectors(vocab: &Vocab, dim: usize, scale: f64, rng: &mut Rng) -> EmbeddingTable {
    let mut matrix = Tensor::uniform(&[vocab.len(), dim], -scale, scale, rng);
    for id in [vocab.marker_id(), vocab.pad_id()] {
        matrix.data_mut()[id * dim..(id + 1) * dim].fill(0.0);
    }
    EmbeddingTable {
        matrix,
        trainable: false,
    }
}
