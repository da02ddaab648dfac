//! Convolutional sentence classifier with max-over-time pooling.

use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingTable, InputEncoder};
use super::recurrent::output_layer;
use super::{glorot, Classifier, Mode};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{dropout_mask, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub widths: Vec<usize>,
    pub filters: usize,
    /// Inputs shorter than this are zero-padded at the end.
    pub pad_to: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            widths: vec![3, 4, 5],
            filters: 100,
            pad_to: 60,
        }
    }
}

impl CnnConfig {
    pub fn feature_dim(&self) -> usize {
        self.widths.len() * self.filters
    }
}

fn conv_name(width: usize, what: &str) -> String {
    format!("conv{width}.{what}")
}

/// Max-pooled filter responses of `x` (`T x n`), `1 x (widths * filters)`.
pub fn conv_features(
    tape: &mut Tape,
    store: &ParamStore,
    config: &CnnConfig,
    x: Var,
) -> Result<Var> {
    let mut pooled = Vec::with_capacity(config.widths.len());
    for &w in &config.widths {
        let windows = tape.unfold(x, w)?;
        let kernel = tape.param(store, &conv_name(w, "weight"))?;
        let bias = tape.param(store, &conv_name(w, "bias"))?;
        let maps = tape.matmul(windows, kernel)?;
        let maps = tape.add(maps, bias)?;
        let maps = tape.relu(maps)?;
        pooled.push(tape.max_cols(maps)?);
    }
    tape.concat_cols(&pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub encoder: InputEncoder,
    pub params: ParamStore,
}

impl CnnModel {
    pub fn new(
        config: CnnConfig,
        encoder: InputEncoder,
        embeddings: EmbeddingTable,
        rng: &mut Rng,
    ) -> Result<Self> {
        if config.widths.is_empty() || config.widths.contains(&0) || config.filters == 0 {
            return Err(Error::usage("cnn needs positive filter widths and counts"));
        }
        let mut params = ParamStore::new();
        encoder.init_params(&mut params, embeddings, rng)?;
        let n = encoder.input_dim();
        for &w in &config.widths {
            params.insert(
                &conv_name(w, "weight"),
                glorot(w * n, config.filters, rng),
                true,
            )?;
            params.insert(
                &conv_name(w, "bias"),
                Tensor::zeros(&[1, config.filters]),
                true,
            )?;
        }
        params.insert("output.weight", glorot(2, config.feature_dim(), rng), true)?;
        params.insert("output.bias", Tensor::zeros(&[1, 2]), true)?;
        Ok(CnnModel {
            config,
            encoder,
            params,
        })
    }
}

impl Classifier for CnnModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, sample: &Sample, mode: Mode, rng: &mut Rng) -> Result<Var> {
        let widest = self.config.widths.iter().copied().max().unwrap_or(1);
        let rows = self.config.pad_to.max(widest);
        let x = self.encoder.embed(tape, &self.params, sample, rows)?;
        let mut features = conv_features(tape, &self.params, &self.config, x)?;
        if let Mode::Train { dropout } = mode {
            if dropout > 0.0 {
                let mask = dropout_mask(&[1, self.config.feature_dim()], dropout, rng)?;
                let mask = tape.constant(mask);
                features = tape.mul(features, mask)?;
            }
        }
        output_layer(tape, &self.params, features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::embedding::PosMode;
    use crate::model::vocab::Vocab;

    fn model() -> CnnModel {
        let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let vocab = Vocab::build([words.as_slice()], 1).unwrap();
        let pos = Vocab::build([["NN".to_string()].as_slice()], 1).unwrap();
        let table = EmbeddingTable::random(&vocab, 4, &mut Rng::new(1));
        let enc = InputEncoder::new(vocab, pos, PosMode::Off, 4);
        CnnModel::new(CnnConfig::default(), enc, table, &mut Rng::new(2)).unwrap()
    }

    #[test]
    fn pooled_length_is_300() {
        let m = model();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::uniform(&[60, 4], -1.0, 1.0, &mut Rng::new(3)));
        let f = conv_features(&mut tape, &m.params, &m.config, x).unwrap();
        assert_eq!(tape.shape(f), (1, 300));
    }

    #[test]
    fn zero_input_gives_bias_logits() {
        let mut m = model();
        m.params
            .value_mut("output.bias")
            .unwrap()
            .data_mut()
            .copy_from_slice(&[0.3, -0.2]);
        m.params
            .value_mut("embed.words")
            .unwrap()
            .data_mut()
            .fill(0.0);
        let s = Sample {
            label: "none".into(),
            tokens: vec!["w1".into(), "w2".into()],
            pos: vec!["NN".into(), "NN".into()],
            section: "0".into(),
        };
        let p = m.probabilities(&s).unwrap();
        let e = (-0.5f64).exp();
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn pooling_ignores_pattern_position() {
        let m = model();
        let pattern = Tensor::uniform(&[5, 4], -1.0, 1.0, &mut Rng::new(9));
        let features_at = |offset: usize| {
            let mut data = vec![0.0; 60 * 4];
            data[offset * 4..offset * 4 + 20].copy_from_slice(pattern.data());
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::matrix(60, 4, data).unwrap());
            let f = conv_features(&mut tape, &m.params, &m.config, x).unwrap();
            tape.value(f).clone()
        };
        let a = features_at(10);
        let b = features_at(40);
        assert!(a.max_abs_diff(&b) < 1e-14);
    }
}
