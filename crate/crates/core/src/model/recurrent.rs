//! Bidirectional LSTM encoder with either attention-over-attention weighted
//! pooling (WP) or plain mean pooling (the LSTM baseline).
//!
//! Both variants own exactly the same parameters; the pooling weights are
//! computed from the hidden states alone.

use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingTable, InputEncoder};
use super::{glorot, Classifier, Mode};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Axis, Tape, Var};
use crate::tensor::{dropout_mask, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Weighted pooling with attention-over-attention weights.
    Attention,
    /// Uniform weights, i.e. the mean of all hidden states.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrentConfig {
    /// LSTM hidden size per direction.
    pub hidden: usize,
    /// Units in the dense layer after pooling.
    pub dense: usize,
    pub activation: Activation,
    /// LSTM weights are drawn from `uniform(-init_scale, init_scale)`.
    pub init_scale: f64,
    pub forget_bias: f64,
}

impl Default for RecurrentConfig {
    fn default() -> Self {
        RecurrentConfig {
            hidden: 64,
            dense: 64,
            activation: Activation::Relu,
            init_scale: 0.08,
            forget_bias: 1.0,
        }
    }
}

const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];

fn lstm_name(dir: &str, what: &str) -> String {
    format!("lstm.{dir}.{what}")
}

/// Add the parameters of a bidirectional LSTM reading `input` features.
/// Gate blocks are laid out as input, forget, cell, output.
pub fn init_bilstm(
    store: &mut ParamStore,
    input: usize,
    hidden: usize,
    cfg: &RecurrentConfig,
    rng: &mut Rng,
) -> Result<()> {
    let s = hidden;
    for dir in DIRECTIONS {
        let k = cfg.init_scale;
        store.insert(
            &lstm_name(dir, "w_input"),
            Tensor::uniform(&[input, 4 * s], -k, k, rng),
            true,
        )?;
        store.insert(
            &lstm_name(dir, "w_hidden"),
            Tensor::uniform(&[s, 4 * s], -k, k, rng),
            true,
        )?;
        let mut bias = Tensor::zeros(&[1, 4 * s]);
        bias.data_mut()[s..2 * s].fill(cfg.forget_bias);
        store.insert(&lstm_name(dir, "bias"), bias, true)?;
    }
    Ok(())
}

fn lstm_direction(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    dir: &str,
    reverse: bool,
) -> Result<Vec<Var>> {
    let w_in = tape.param(store, &lstm_name(dir, "w_input"))?;
    let w_hid = tape.param(store, &lstm_name(dir, "w_hidden"))?;
    let bias = tape.param(store, &lstm_name(dir, "bias"))?;
    let s = tape.shape(w_hid).0;
    let steps = tape.shape(x).0;

    let projected = tape.matmul(x, w_in)?;
    let projected = tape.add(projected, bias)?;

    let mut hs: Vec<Option<Var>> = vec![None; steps];
    let mut state: Option<(Var, Var)> = None;
    let order: Vec<usize> = if reverse {
        (0..steps).rev().collect()
    } else {
        (0..steps).collect()
    };
    for t in order {
        let mut gates = tape.slice_rows(projected, t, 1)?;
        if let Some((h, _)) = state {
            let rec = tape.matmul(h, w_hid)?;
            gates = tape.add(gates, rec)?;
        }
        let i = tape.slice_cols(gates, 0, s)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice_cols(gates, s, s)?;
        let f = tape.sigmoid(f)?;
        let g = tape.slice_cols(gates, 2 * s, s)?;
        let g = tape.tanh(g)?;
        let o = tape.slice_cols(gates, 3 * s, s)?;
        let o = tape.sigmoid(o)?;
        let ig = tape.mul(i, g)?;
        let c = match state {
            Some((_, c_prev)) => {
                let fc = tape.mul(f, c_prev)?;
                tape.add(fc, ig)?
            }
            None => ig,
        };
        let tc = tape.tanh(c)?;
        let h = tape.mul(o, tc)?;
        hs[t] = Some(h);
        state = Some((h, c));
    }
    Ok(hs
        .into_iter()
        .map(|h| h.expect("every step visited"))
        .collect())
}

/// Hidden states of both directions, one row per time step: `T x 2s`, each
/// row the forward state followed by the backward state. Initial states are
/// zero.
pub fn bilstm_forward(tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
    if tape.shape(x).0 == 0 {
        return Err(Error::usage("BiLSTM needs at least one time step"));
    }
    let fwd = lstm_direction(tape, store, x, DIRECTIONS[0], false)?;
    let bwd = lstm_direction(tape, store, x, DIRECTIONS[1], true)?;
    let fwd = tape.concat_rows(&fwd)?;
    let bwd = tape.concat_rows(&bwd)?;
    tape.concat_cols(&[fwd, bwd])
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    /// Pairwise matching matrix, `T x T`.
    pub matching: Var,
    /// Softmax within each row of the matching matrix.
    pub row_softmax: Var,
    /// Softmax within each column of the matching matrix.
    pub col_softmax: Var,
    /// Column means of the row softmax, `1 x T`.
    pub beta: Var,
    /// Column softmax times beta, `T x 1`.
    pub alpha: Var,
    /// Transposed row softmax times beta, `T x 1`; equal to `alpha` because
    /// the matching matrix is symmetric.
    pub alpha_transposed: Var,
}

/// Attention-over-attention weights from hidden states `hidden` (`T x 2s`).
pub fn attention_weights(tape: &mut Tape, hidden: Var) -> Result<AttentionVars> {
    let ht = tape.transpose(hidden)?;
    let matching = tape.matmul(hidden, ht)?;
    let row_softmax = tape.softmax(matching, Axis::Rows)?;
    let col_softmax = tape.softmax(matching, Axis::Cols)?;
    let beta = tape.mean(row_softmax, Axis::Cols)?;
    let beta_col = tape.transpose(beta)?;
    let alpha = tape.matmul(col_softmax, beta_col)?;
    let row_t = tape.transpose(row_softmax)?;
    let alpha_transposed = tape.matmul(row_t, beta_col)?;
    Ok(AttentionVars {
        matching,
        row_softmax,
        col_softmax,
        beta,
        alpha,
        alpha_transposed,
    })
}

/// `sum_t alpha_t h_t` as a `1 x 2s` row; `alpha` is a `T x 1` column.
pub fn weighted_pool(tape: &mut Tape, hidden: Var, alpha: Var) -> Result<Var> {
    let at = tape.transpose(alpha)?;
    tape.matmul(at, hidden)
}

/// Dense layer with activation, optional dropout, output affine and softmax.
pub(crate) fn classifier_head(
    tape: &mut Tape,
    store: &ParamStore,
    pooled: Var,
    activation: Activation,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Var, Var)> {
    let wz = tape.param(store, "dense.weight")?;
    let bz = tape.param(store, "dense.bias")?;
    let wzt = tape.transpose(wz)?;
    let pre = tape.matmul(pooled, wzt)?;
    let pre = tape.add(pre, bz)?;
    let mut z = match activation {
        Activation::Relu => tape.relu(pre)?,
        Activation::Tanh => tape.tanh(pre)?,
    };
    if let Mode::Train { dropout } = mode {
        if dropout > 0.0 {
            let mask = dropout_mask(&[1, tape.shape(z).1], dropout, rng)?;
            let mask = tape.constant(mask);
            z = tape.mul(z, mask)?;
        }
    }
    let probs = output_layer(tape, store, z)?;
    Ok((z, probs))
}

pub(crate) fn output_layer(tape: &mut Tape, store: &ParamStore, features: Var) -> Result<Var> {
    let wo = tape.param(store, "output.weight")?;
    let bo = tape.param(store, "output.bias")?;
    let wot = tape.transpose(wo)?;
    let logits = tape.matmul(features, wot)?;
    let logits = tape.add(logits, bo)?;
    tape.softmax(logits, Axis::Rows)
}

/// Every intermediate of one forward pass, as plain values.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Input rows, `T x n`.
    pub x: Tensor,
    /// Hidden states as columns, `2s x T`.
    pub h: Tensor,
    pub m: Tensor,
    pub m_row: Tensor,
    pub m_col: Tensor,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_transposed: Vec<f64>,
    pub c: Vec<f64>,
    pub z: Vec<f64>,
    pub y_hat: [f64; 2],
}

struct RunVars {
    x: Var,
    hidden: Var,
    attention: Option<AttentionVars>,
    alpha: Var,
    pooled: Var,
    z: Var,
    probs: Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentModel {
    pub pooling: Pooling,
    pub config: RecurrentConfig,
    pub encoder: InputEncoder,
    pub params: ParamStore,
}

impl RecurrentModel {
    pub fn new(
        pooling: Pooling,
        config: RecurrentConfig,
        encoder: InputEncoder,
        embeddings: EmbeddingTable,
        rng: &mut Rng,
    ) -> Result<Self> {
        if config.hidden == 0 || config.dense == 0 {
            return Err(Error::usage("hidden and dense sizes must be positive"));
        }
        let mut params = ParamStore::new();
        encoder.init_params(&mut params, embeddings, rng)?;
        let n = encoder.input_dim();
        let s = config.hidden;
        init_bilstm(&mut params, n, s, &config, rng)?;
        params.insert("dense.weight", glorot(config.dense, 2 * s, rng), true)?;
        params.insert("dense.bias", Tensor::zeros(&[1, config.dense]), true)?;
        params.insert("output.weight", glorot(2, config.dense, rng), true)?;
        params.insert("output.bias", Tensor::zeros(&[1, 2]), true)?;
        Ok(RecurrentModel {
            pooling,
            config,
            encoder,
            params,
        })
    }

    fn run(
        &self,
        tape: &mut Tape,
        sample: &Sample,
        mode: Mode,
        rng: &mut Rng,
        alpha_override: Option<&[f64]>,
    ) -> Result<RunVars> {
        let x = self.encoder.embed(tape, &self.params, sample, 0)?;
        let hidden = bilstm_forward(tape, &self.params, x)?;
        let steps = tape.shape(hidden).0;

        let (attention, alpha) = match (alpha_override, self.pooling) {
            (Some(weights), _) => {
                if weights.len() != steps {
                    return Err(Error::usage(format!(
                        "alpha override has {} weights for {steps} steps",
                        weights.len()
                    )));
                }
                (None, tape.constant(Tensor::column(weights.to_vec())))
            }
            (None, Pooling::Mean) => (None, tape.constant(uniform_weights(steps))),
            (None, Pooling::Attention) => {
                let att = attention_weights(tape, hidden)?;
                (Some(att), att.alpha)
            }
        };
        let pooled = weighted_pool(tape, hidden, alpha)?;
        let (z, probs) = classifier_head(
            tape,
            &self.params,
            pooled,
            self.config.activation,
            mode,
            rng,
        )?;
        Ok(RunVars {
            x,
            hidden,
            attention,
            alpha,
            pooled,
            z,
            probs,
        })
    }

    /// Forward pass returning every intermediate. With `alpha_override`
    /// the given pooling weights replace the computed ones.
    pub fn forward_trace(
        &self,
        sample: &Sample,
        mode: Mode,
        rng: &mut Rng,
        alpha_override: Option<&[f64]>,
    ) -> Result<ForwardTrace> {
        let mut tape = Tape::new();
        let v = self.run(&mut tape, sample, mode, rng, alpha_override)?;
        let val = |var: Var| tape.value(var).clone();
        let steps = tape.shape(v.hidden).0;
        let empty = || Tensor::zeros(&[steps, steps]);
        let (m, m_row, m_col, beta, alpha_t) = match v.attention {
            Some(a) => (
                val(a.matching),
                val(a.row_softmax),
                val(a.col_softmax),
                val(a.beta).into_data(),
                val(a.alpha_transposed).into_data(),
            ),
            None => (empty(), empty(), empty(), vec![], val(v.alpha).into_data()),
        };
        let probs = tape.value(v.probs).data();
        Ok(ForwardTrace {
            x: val(v.x),
            h: tape.value(v.hidden).transpose(),
            m,
            m_row,
            m_col,
            beta,
            alpha: val(v.alpha).into_data(),
            alpha_transposed: alpha_t,
            c: val(v.pooled).into_data(),
            z: val(v.z).into_data(),
            y_hat: [probs[0], probs[1]],
        })
    }
}

fn uniform_weights(steps: usize) -> Tensor {
    Tensor::column(vec![1.0 / steps as f64; steps])
}

impl Classifier for RecurrentModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, sample: &Sample, mode: Mode, rng: &mut Rng) -> Result<Var> {
        Ok(self.run(tape, sample, mode, rng, None)?.probs)
    }
}
