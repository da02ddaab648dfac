//! Logistic regression over unigram and bigram counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Classifier, Mode};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Axis, Tape, Var};
use crate::tensor::Tensor;

pub const WEIGHT_PARAM: &str = "logreg.weight";
pub const BIAS_PARAM: &str = "logreg.bias";

/// Joins the two tokens of a bigram feature.
pub const BIGRAM_JOINER: char = '\u{2581}';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    /// Inverse regularisation strength.
    pub c: f64,
    /// Add `pos:TAG` unigram features.
    pub pos_features: bool,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            c: 1.0,
            pos_features: false,
        }
    }
}

/// Unigram and bigram counts of the sample tokens.
pub fn featurize(sample: &Sample, pos_features: bool) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for t in &sample.tokens {
        *out.entry(t.clone()).or_insert(0.0) += 1.0;
    }
    for pair in sample.tokens.windows(2) {
        *out.entry(format!("{}{BIGRAM_JOINER}{}", pair[0], pair[1]))
            .or_insert(0.0) += 1.0;
    }
    if pos_features {
        for p in &sample.pos {
            *out.entry(format!("pos:{p}")).or_insert(0.0) += 1.0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub config: LogRegConfig,
    /// Feature name to weight row.
    pub features: BTreeMap<String, usize>,
    /// Coefficient of the squared weight norm added to each batch loss.
    pub l2: f64,
    pub params: ParamStore,
}

impl LogRegModel {
    /// Fix the feature space from `train`; weights start at zero.
    pub fn new(config: LogRegConfig, train: &[Sample]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::usage("cannot build features from no samples"));
        }
        if config.c <= 0.0 {
            return Err(Error::usage("logreg c must be positive"));
        }
        let mut names = std::collections::BTreeSet::new();
        for s in train {
            names.extend(featurize(s, config.pos_features).into_keys());
        }
        let features: BTreeMap<String, usize> =
            names.into_iter().enumerate().map(|(i, f)| (f, i)).collect();
        let mut params = ParamStore::new();
        params.insert(WEIGHT_PARAM, Tensor::zeros(&[features.len(), 1]), true)?;
        params.insert(BIAS_PARAM, Tensor::zeros(&[1, 1]), true)?;
        let l2 = 1.0 / (2.0 * config.c * train.len() as f64);
        Ok(LogRegModel {
            config,
            features,
            l2,
            params,
        })
    }

    /// Known feature rows and their counts; unseen n-grams are dropped.
    fn active(&self, sample: &Sample) -> (Vec<usize>, Vec<f64>) {
        featurize(sample, self.config.pos_features)
            .into_iter()
            .filter_map(|(f, n)| self.features.get(&f).map(|&i| (i, n)))
            .unzip()
    }
}

impl Classifier for LogRegModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(
        &self,
        tape: &mut Tape,
        sample: &Sample,
        _mode: Mode,
        _rng: &mut Rng,
    ) -> Result<Var> {
        let bias = tape.param(&self.params, BIAS_PARAM)?;
        let (ids, counts) = self.active(sample);
        let logit = if ids.is_empty() {
            bias
        } else {
            let w = tape.param(&self.params, WEIGHT_PARAM)?;
            let picked = tape.gather_rows(w, &ids)?;
            let x = tape.constant(Tensor::row(counts));
            let score = tape.matmul(x, picked)?;
            tape.add(score, bias)?
        };
        let zero = tape.constant(Tensor::zeros(&[1, 1]));
        let logits = tape.concat_cols(&[zero, logit])?;
        tape.softmax(logits, Axis::Rows)
    }

    fn penalty(&self, tape: &mut Tape) -> Result<Option<Var>> {
        if self.l2 == 0.0 {
            return Ok(None);
        }
        let w = tape.param(&self.params, WEIGHT_PARAM)?;
        let sq = tape.mul(w, w)?;
        let total = tape.sum_all(sq)?;
        Ok(Some(tape.scale(total, self.l2)?))
    }
}
