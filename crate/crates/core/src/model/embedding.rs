//! Word-vector tables and the shared input layer.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vocab::Vocab;
use crate::corpus::{Sample, MARKER};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const WORDS_PARAM: &str = "embed.words";
pub const MARKER_PARAM: &str = "embed.marker";
pub const POS_PARAM: &str = "pos.embedding";

/// Range of the uniform draw for words missing from the vector file.
pub const UNKNOWN_INIT: f64 = 0.05;

/// `|V| x d` word vectors. Frozen unless `trainable`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub matrix: Tensor,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    /// Random table for runs without a vector file.
    pub fn random(vocab: &Vocab, dim: usize, rng: &mut Rng) -> Self {
        fill_table(vocab, dim, &HashMap::new(), rng)
    }
}

fn fill_table(
    vocab: &Vocab,
    dim: usize,
    known: &HashMap<String, Vec<f64>>,
    rng: &mut Rng,
) -> EmbeddingTable {
    let mut data = Vec::with_capacity(vocab.len() * dim);
    for id in 0..vocab.len() {
        if id == vocab.pad_id() || id == vocab.marker_id() {
            // The marker has its own trainable vector; padding stays zero.
            data.extend(std::iter::repeat_n(0.0, dim));
        } else if let Some(v) = known.get(vocab.token(id)) {
            data.extend_from_slice(v);
        } else {
            data.extend((0..dim).map(|_| rng.uniform_range(-UNKNOWN_INIT, UNKNOWN_INIT)));
        }
    }
    EmbeddingTable {
        matrix: Tensor::matrix(vocab.len(), dim, data).expect("sized above"),
        trainable: false,
    }
}

/// Read `token v1 .. vd` lines (an optional `count dim` header is skipped)
/// and build a table for `vocab`. Words absent from the file are drawn
/// uniformly from `rng` in id order, so reloading with the same seed gives
/// the same rows.
pub fn load_embeddings<R: BufRead>(
    reader: R,
    vocab: &Vocab,
    dim: usize,
    rng: &mut Rng,
) -> Result<EmbeddingTable> {
    let mut known: HashMap<String, Vec<f64>> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if i == 0
            && rest.len() == 1
            && token.parse::<usize>().is_ok()
            && rest[0].parse::<usize>().is_ok()
        {
            continue;
        }
        if rest.len() != dim {
            return Err(Error::parse(
                i + 1,
                format!(
                    "vector for {token:?} has {} values, expected {dim}",
                    rest.len()
                ),
            ));
        }
        if vocab.get(token).is_none() || known.contains_key(token) {
            continue;
        }
        let values = rest
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(i + 1, format!("bad number: {e}")))?;
        known.insert(token.to_string(), values);
    }
    Ok(fill_table(vocab, dim, &known, rng))
}

pub fn load_embeddings_file(
    path: &Path,
    vocab: &Vocab,
    dim: usize,
    rng: &mut Rng,
) -> Result<EmbeddingTable> {
    load_embeddings(BufReader::new(File::open(path)?), vocab, dim, rng)
}

/// How POS tags enter the input: not at all, as one-hot vectors over the tag
/// vocabulary, or as learned embeddings (40 units by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PosMode {
    Off,
    OneHot,
    Learned { dim: usize },
}

impl Default for PosMode {
    fn default() -> Self {
        PosMode::learned()
    }
}

impl PosMode {
    pub fn learned() -> Self {
        PosMode::Learned { dim: 40 }
    }
}

/// Maps a sample to its `T x (d + pos_dim)` input matrix: word vector,
/// optionally followed by the tag feature, per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEncoder {
    pub vocab: Vocab,
    pub pos_vocab: Vocab,
    pub pos_mode: PosMode,
    pub word_dim: usize,
}

impl InputEncoder {
    pub fn new(vocab: Vocab, pos_vocab: Vocab, pos_mode: PosMode, word_dim: usize) -> Self {
        InputEncoder {
            vocab,
            pos_vocab,
            pos_mode,
            word_dim,
        }
    }

    pub fn pos_dim(&self) -> usize {
        match self.pos_mode {
            PosMode::Off => 0,
            PosMode::OneHot => self.pos_vocab.len(),
            PosMode::Learned { dim } => dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.word_dim + self.pos_dim()
    }

    /// Add the word table, marker vector and (learned mode) tag table.
    pub fn init_params(
        &self,
        store: &mut ParamStore,
        table: EmbeddingTable,
        rng: &mut Rng,
    ) -> Result<()> {
        if table.rows() != self.vocab.len() || table.dim() != self.word_dim {
            return Err(Error::usage(format!(
                "embedding table is {}x{}, vocabulary needs {}x{}",
                table.rows(),
                table.dim(),
                self.vocab.len(),
                self.word_dim
            )));
        }
        store.insert(WORDS_PARAM, table.matrix, table.trainable)?;
        store.insert(
            MARKER_PARAM,
            Tensor::uniform(&[1, self.word_dim], -UNKNOWN_INIT, UNKNOWN_INIT, rng),
            true,
        )?;
        if let PosMode::Learned { dim } = self.pos_mode {
            store.insert(
                POS_PARAM,
                Tensor::uniform(&[self.pos_vocab.len(), dim], -0.08, 0.08, rng),
                true,
            )?;
        }
        Ok(())
    }

    /// Input matrix for `sample`, zero-padded at the end to at least
    /// `min_rows` rows.
    pub fn embed(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        sample: &Sample,
        min_rows: usize,
    ) -> Result<Var> {
        let t = sample.tokens.len();
        if t == 0 {
            return Err(Error::usage("cannot embed an empty sample"));
        }
        let ids: Vec<usize> = sample.tokens.iter().map(|w| self.vocab.id(w)).collect();
        let d = self.word_dim;

        let words = store
            .get(WORDS_PARAM)
            .ok_or_else(|| Error::usage("model has no word embeddings"))?;
        let words = if words.trainable {
            let table = tape.param(store, WORDS_PARAM)?;
            tape.gather_rows(table, &ids)?
        } else {
            let mut data = Vec::with_capacity(t * d);
            for &id in &ids {
                data.extend_from_slice(words.value.row_slice(id));
            }
            tape.constant(Tensor::matrix(t, d, data)?)
        };

        let mut x = words;
        if sample.tokens.iter().any(|w| w == MARKER) {
            let mask: Vec<f64> = sample
                .tokens
                .iter()
                .map(|w| if w == MARKER { 1.0 } else { 0.0 })
                .collect();
            let mask = tape.constant(Tensor::column(mask));
            let marker = tape.param(store, MARKER_PARAM)?;
            let spread = tape.matmul(mask, marker)?;
            x = tape.add(x, spread)?;
        }

        match self.pos_mode {
            PosMode::Off => {}
            PosMode::OneHot => {
                let p = self.pos_vocab.len();
                let mut data = vec![0.0; t * p];
                for (i, tag) in sample.pos.iter().enumerate() {
                    data[i * p + self.pos_vocab.id(tag)] = 1.0;
                }
                let onehot = tape.constant(Tensor::matrix(t, p, data)?);
                x = tape.concat_cols(&[x, onehot])?;
            }
            PosMode::Learned { .. } => {
                let tag_ids: Vec<usize> = sample.pos.iter().map(|p| self.pos_vocab.id(p)).collect();
                let table = tape.param(store, POS_PARAM)?;
                let tags = tape.gather_rows(table, &tag_ids)?;
                x = tape.concat_cols(&[x, tags])?;
            }
        }

        if min_rows > t {
            let pad = tape.constant(Tensor::zeros(&[min_rows - t, self.input_dim()]));
            x = tape.concat_rows(&[x, pad])?;
        }
        Ok(x)
    }
}
