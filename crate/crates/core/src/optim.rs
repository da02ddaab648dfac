//! Adam updates and elementwise gradient clipping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.second.get(name)
    }

    /// One bias-corrected Adam update of every trainable parameter.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) -> Result<()> {
        let names: Vec<String> = params.trainable().map(|(k, _)| k.to_string()).collect();
        for name in &names {
            let g = grads
                .get(name)
                .ok_or_else(|| Error::usage(format!("no gradient for parameter {name:?}")))?;
            let p = params.value(name)?;
            if g.shape() != p.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correct1 = 1.0 - beta1.powi(t);
        let correct2 = 1.0 - beta2.powi(t);

        for name in names {
            let g = grads.get(&name).expect("checked above");
            let p = params.value_mut(&name).expect("checked above");
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(p.shape()));
            let v = self
                .second
                .entry(name)
                .or_insert_with(|| Tensor::zeros(p.shape()));
            for (((pi, gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / correct1;
                let v_hat = *vi / correct2;
                *pi -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Clamp every gradient component into `[lo, hi]`.
pub fn clip_gradients(grads: &mut Gradients, lo: f64, hi: f64) -> Result<()> {
    if lo > hi {
        return Err(Error::usage(format!("clip bounds reversed: {lo} > {hi}")));
    }
    for (_, g) in grads.iter_mut() {
        for x in g.data_mut() {
            *x = x.clamp(lo, hi);
        }
    }
    Ok(())
}
