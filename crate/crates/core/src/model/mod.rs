//! Binary classifiers over extracted samples: the weighted-pooling BiLSTM,
//! its mean-pooling twin, a CNN, logistic regression and the majority class.

pub mod cnn;
pub mod embedding;
pub mod logreg;
pub mod mfc;
pub mod recurrent;
pub mod vocab;

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub use cnn::{CnnConfig, CnnModel};
pub use embedding::{load_embeddings, load_embeddings_file, EmbeddingTable, InputEncoder, PosMode};
pub use logreg::{featurize, LogRegConfig, LogRegModel};
pub use mfc::MfcModel;
pub use recurrent::{Activation, ForwardTrace, Pooling, RecurrentConfig, RecurrentModel};
pub use vocab::Vocab;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Train { dropout: f64 },
    Eval,
}

/// A model producing a `1 x 2` distribution over (absence, presence).
pub trait Classifier {
    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    fn forward(&self, tape: &mut Tape, sample: &Sample, mode: Mode, rng: &mut Rng) -> Result<Var>;

    /// Regularisation term added once per batch, already scaled.
    fn penalty(&self, _tape: &mut Tape) -> Result<Option<Var>> {
        Ok(None)
    }

    /// Number of trainable scalars.
    fn param_count(&self) -> usize {
        self.params().param_count()
    }

    fn probabilities(&self, sample: &Sample) -> Result<[f64; 2]> {
        let mut tape = Tape::new();
        let probs = self.forward(&mut tape, sample, Mode::Eval, &mut Rng::new(0))?;
        let p = tape.value(probs).data();
        Ok([p[0], p[1]])
    }

    /// 1 when presence is strictly more probable, else 0.
    fn predict(&self, sample: &Sample) -> Result<usize> {
        let [p0, p1] = self.probabilities(sample)?;
        Ok(usize::from(p1 > p0))
    }
}

/// Glorot-uniform `rows x cols` matrix.
pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let k = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::uniform(&[rows, cols], -k, k, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mfc,
    Logreg,
    Cnn,
    Lstm,
    Wp,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Mfc => "mfc",
            Variant::Logreg => "logreg",
            Variant::Cnn => "cnn",
            Variant::Lstm => "lstm",
            Variant::Wp => "wp",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfc" => Ok(Variant::Mfc),
            "logreg" => Ok(Variant::Logreg),
            "cnn" => Ok(Variant::Cnn),
            "lstm" => Ok(Variant::Lstm),
            "wp" => Ok(Variant::Wp),
            other => Err(Error::usage(format!("unknown model variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Model {
    Mfc(MfcModel),
    Logreg(LogRegModel),
    Cnn(CnnModel),
    Lstm(RecurrentModel),
    Wp(RecurrentModel),
}

impl Model {
    pub fn variant(&self) -> Variant {
        match self {
            Model::Mfc(_) => Variant::Mfc,
            Model::Logreg(_) => Variant::Logreg,
            Model::Cnn(_) => Variant::Cnn,
            Model::Lstm(_) => Variant::Lstm,
            Model::Wp(_) => Variant::Wp,
        }
    }

    pub fn classifier(&self) -> &dyn Classifier {
        match self {
            Model::Mfc(m) => m,
            Model::Logreg(m) => m,
            Model::Cnn(m) => m,
            Model::Lstm(m) | Model::Wp(m) => m,
        }
    }

    pub fn classifier_mut(&mut self) -> &mut dyn Classifier {
        match self {
            Model::Mfc(m) => m,
            Model::Logreg(m) => m,
            Model::Cnn(m) => m,
            Model::Lstm(m) | Model::Wp(m) => m,
        }
    }

    pub fn param_count(&self) -> usize {
        self.classifier().param_count()
    }

    pub fn predict(&self, sample: &Sample) -> Result<usize> {
        self.classifier().predict(sample)
    }

    /// Check that stored tensors agree with the vocabularies and configs.
    pub fn validate(&self) -> Result<()> {
        let (encoder, params) = match self {
            Model::Mfc(m) => {
                return if m.label <= 1 {
                    Ok(())
                } else {
                    Err(Error::usage(format!(
                        "majority label {} is not 0 or 1",
                        m.label
                    )))
                };
            }
            Model::Logreg(m) => {
                let rows = m.params.value(logreg::WEIGHT_PARAM)?.rows();
                if rows != m.features.len() {
                    return Err(Error::usage(format!(
                        "{} feature weights for {} features",
                        rows,
                        m.features.len()
                    )));
                }
                return Ok(());
            }
            Model::Cnn(m) => (&m.encoder, &m.params),
            Model::Lstm(m) | Model::Wp(m) => (&m.encoder, &m.params),
        };
        let expect = |name: &str, shape: [usize; 2]| -> Result<()> {
            let got = params.value(name)?.shape();
            if got != shape {
                return Err(Error::usage(format!(
                    "{name} has shape {got:?} but the vocabulary and config imply {shape:?}"
                )));
            }
            Ok(())
        };
        expect(
            embedding::WORDS_PARAM,
            [encoder.vocab.len(), encoder.word_dim],
        )?;
        expect(embedding::MARKER_PARAM, [1, encoder.word_dim])?;
        if let PosMode::Learned { dim } = encoder.pos_mode {
            expect(embedding::POS_PARAM, [encoder.pos_vocab.len(), dim])?;
        }
        for special in [crate::corpus::MARKER, vocab::UNKNOWN, vocab::PADDING] {
            if encoder.vocab.get(special).is_none() {
                return Err(Error::usage(format!("vocabulary lacks {special}")));
            }
        }
        Ok(())
    }

    /// Word vocabulary the model was built with, if it uses one.
    pub fn vocab(&self) -> Option<&Vocab> {
        match self {
            Model::Mfc(_) | Model::Logreg(_) => None,
            Model::Cnn(m) => Some(&m.encoder.vocab),
            Model::Lstm(m) | Model::Wp(m) => Some(&m.encoder.vocab),
        }
    }
}

/// Which model to build and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Word vector size; must match the vector file when one is given.
    pub word_dim: usize,
    pub pos: PosMode,
    pub recurrent: RecurrentConfig,
    pub cnn: CnnConfig,
    pub logreg: LogRegConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Wp,
            word_dim: 300,
            pos: PosMode::default(),
            recurrent: RecurrentConfig::default(),
            cnn: CnnConfig::default(),
            logreg: LogRegConfig::default(),
        }
    }
}

/// Word and tag vocabularies of a training set.
pub fn build_vocabs(train: &[Sample]) -> Result<(Vocab, Vocab)> {
    let words = Vocab::build(train.iter().map(|s| s.tokens.as_slice()), 1)?;
    let tags = Vocab::build(train.iter().map(|s| s.pos.as_slice()), 1)?;
    Ok((words, tags))
}

/// Build an untrained model. `embeddings` maps the word vocabulary of
/// `train`; it is required by the neural variants and ignored otherwise.
pub fn build_model(
    cfg: &ModelConfig,
    train: &[Sample],
    embeddings: impl FnOnce(&Vocab) -> Result<EmbeddingTable>,
    rng: &mut Rng,
) -> Result<Model> {
    if train.is_empty() {
        return Err(Error::usage(
            "cannot build a model from an empty training set",
        ));
    }
    let neural = || -> Result<(InputEncoder, EmbeddingTable)> {
        let (words, tags) = build_vocabs(train)?;
        let table = embeddings(&words)?;
        Ok((InputEncoder::new(words, tags, cfg.pos, cfg.word_dim), table))
    };
    Ok(match cfg.variant {
        Variant::Mfc => Model::Mfc(MfcModel::fit(train)?),
        Variant::Logreg => Model::Logreg(LogRegModel::new(cfg.logreg.clone(), train)?),
        Variant::Cnn => {
            let (enc, table) = neural()?;
            Model::Cnn(CnnModel::new(cfg.cnn.clone(), enc, table, rng)?)
        }
        Variant::Lstm => {
            let (enc, table) = neural()?;
            Model::Lstm(RecurrentModel::new(
                Pooling::Mean,
                cfg.recurrent.clone(),
                enc,
                table,
                rng,
            )?)
        }
        Variant::Wp => {
            let (enc, table) = neural()?;
            Model::Wp(RecurrentModel::new(
                Pooling::Attention,
                cfg.recurrent.clone(),
                enc,
                table,
                rng,
            )?)
        }
    })
}

pub const CHECKPOINT_FORMAT: &str = "aptrigger-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Dataset the model was trained on.
    pub dataset: String,
    /// Epoch with the best development accuracy; 0 for fitted models.
    pub best_epoch: usize,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(dataset: &str, best_epoch: usize, model: Model) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            dataset: dataset.into(),
            best_epoch,
            model,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::usage(format!(
                "{} is not a version {CHECKPOINT_VERSION} checkpoint",
                path.display()
            )));
        }
        Ok(ckpt)
    }
}
