use serde::{Deserialize, Serialize};

use super::{Classifier, Mode};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Constant predictor of the training majority label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfcModel {
    pub label: u8,
    #[serde(skip)]
    params: ParamStore,
}

impl MfcModel {
    pub fn new(label: u8) -> Self {
        MfcModel {
            label,
            params: ParamStore::new(),
        }
    }

    /// Majority label of `train`; a tie goes to presence.
    pub fn fit(train: &[Sample]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::usage("cannot fit the majority class on no samples"));
        }
        let pos = train.iter().filter(|s| s.is_positive()).count();
        Ok(MfcModel::new(u8::from(2 * pos >= train.len())))
    }
}

impl Classifier for MfcModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(
        &self,
        tape: &mut Tape,
        _sample: &Sample,
        _mode: Mode,
        _rng: &mut Rng,
    ) -> Result<Var> {
        let p = if self.label == 1 {
            [0.0, 1.0]
        } else {
            [1.0, 0.0]
        };
        Ok(tape.constant(Tensor::row(p.to_vec())))
    }
}
