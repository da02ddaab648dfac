//! Mini-batch training with early stopping, and evaluation reports.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::metrics::{mcnemar, ConfusionMatrix, ContingencyTable, McNemar};
use crate::model::{Classifier, Mode};
use crate::optim::{clip_gradients, AdamConfig, AdamState};
use crate::rng::Rng;
use crate::tape::{Tape, Var};

/// Probabilities below this are clamped before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Significance level used in comparison reports.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub dropout: f64,
    /// Elementwise gradient bounds; `None` disables clipping.
    pub clip: Option<[f64; 2]>,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            dropout: 0.5,
            clip: Some([-1.0, 1.0]),
            patience: 10,
            max_epochs: 100,
            seed: 0,
            learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::usage("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::usage(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        if self.patience == 0 {
            return Err(Error::usage("patience must be at least 1"));
        }
        if let Some([lo, hi]) = self.clip {
            if lo > hi {
                return Err(Error::usage(format!(
                    "clip bounds [{lo}, {hi}] are reversed"
                )));
            }
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::usage("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Mean negative log-likelihood of `labels` under the `1 x 2` rows `probs`,
/// with the number of probabilities clamped at [`LOG_FLOOR`].
pub fn batch_loss(tape: &mut Tape, probs: &[Var], labels: &[usize]) -> Result<(Var, usize)> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::usage(format!(
            "batch of {} predictions and {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut clamped = 0;
    let mut terms = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        if tape.value(p).data()[y] < LOG_FLOOR {
            clamped += 1;
        }
        terms.push(tape.neg_log_pick(p, y, LOG_FLOOR)?);
    }
    let total = tape.add_n(&terms)?;
    Ok((tape.scale(total, 1.0 / probs.len() as f64)?, clamped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once `patience` consecutive epochs fail to strictly beat the best
/// dev accuracy. Ties keep the earlier epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, accuracy: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if accuracy <= best => {
                self.stale += 1;
                if self.stale >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, accuracy));
                self.stale = 0;
                StopDecision::Improved
            }
        }
    }

    /// Best `(epoch, accuracy)` so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
    /// Training probabilities clamped at the log floor this epoch.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// 1-based epoch whose parameters were kept; 0 when nothing was trained.
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

fn describe_batch(data: &[Sample], batch: &[usize]) -> String {
    let mut out = String::new();
    for &i in batch.iter().take(8) {
        let s = &data[i];
        out.push_str(&format!("\n  #{i} [{}] {}", s.label, s.tokens.join(" ")));
    }
    if batch.len() > 8 {
        out.push_str(&format!("\n  ... {} more", batch.len() - 8));
    }
    out
}

/// Train in place; on return the model holds the parameters of the best dev
/// epoch. A model with no trainable parameters is left untouched.
pub fn train<C: Classifier + ?Sized>(
    model: &mut C,
    train: &[Sample],
    dev: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::usage("training needs nonempty train and dev sets"));
    }
    if model.param_count() == 0 {
        return Ok(TrainOutcome {
            best_epoch: 0,
            best_dev_accuracy: accuracy(model, dev)?,
            history: vec![],
            stopped_early: false,
        });
    }

    let root = Rng::new(cfg.seed);
    let mut shuffle_rng = root.split("shuffle");
    let mut dropout_rng = root.split("dropout");
    let mut adam = AdamState::new(AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    });
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params().clone();
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mode = Mode::Train {
        dropout: cfg.dropout,
    };

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut clamped_total = 0;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let mut probs = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                probs.push(model.forward(&mut tape, &train[i], mode, &mut dropout_rng)?);
                labels.push(train[i].target());
            }
            let (mut loss, clamped) = batch_loss(&mut tape, &probs, &labels)?;
            clamped_total += clamped;
            let data_loss = tape.value(loss).data()[0];
            if let Some(pen) = model.penalty(&mut tape)? {
                loss = tape.add(loss, pen)?;
            }
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {value} at epoch {epoch} on batch:{}",
                    describe_batch(train, batch)
                )));
            }
            let mut grads = tape.backward(loss, model.params())?;
            if !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "non-finite gradient at epoch {epoch} on batch:{}",
                    describe_batch(train, batch)
                )));
            }
            if let Some([lo, hi]) = cfg.clip {
                clip_gradients(&mut grads, lo, hi)?;
            }
            adam.step(model.params_mut(), &grads)?;
            loss_sum += data_loss * batch.len() as f64;
        }

        let dev_accuracy = accuracy(model, dev)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            dev_accuracy,
            clamped: clamped_total,
        });
        match stopper.observe(epoch, dev_accuracy) {
            StopDecision::Improved => best_params = model.params().clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }

    *model.params_mut() = best_params;
    let (best_epoch, best_dev_accuracy) = stopper.best().expect("at least one epoch ran");
    Ok(TrainOutcome {
        best_epoch,
        best_dev_accuracy,
        history,
        stopped_early,
    })
}

pub fn predictions<C: Classifier + ?Sized>(model: &C, data: &[Sample]) -> Result<Vec<usize>> {
    data.iter().map(|s| model.predict(s)).collect()
}

pub fn labels(data: &[Sample]) -> Vec<usize> {
    data.iter().map(Sample::target).collect()
}

pub fn accuracy<C: Classifier + ?Sized>(model: &C, data: &[Sample]) -> Result<f64> {
    let preds = predictions(model, data)?;
    Ok(ConfusionMatrix::from_predictions(&preds, &labels(data))?.accuracy())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub split: String,
    pub best_epoch: usize,
    pub samples: u64,
    pub positives: u64,
    pub negatives: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Names attached to a report.
#[derive(Debug, Clone, Default)]
pub struct ReportIds {
    pub model: String,
    pub dataset: String,
    pub split: String,
    pub best_epoch: usize,
}

pub fn report_from_predictions(
    ids: &ReportIds,
    preds: &[usize],
    labels: &[usize],
) -> Result<EvalReport> {
    if labels.is_empty() {
        return Err(Error::usage("cannot evaluate on an empty split"));
    }
    let confusion = ConfusionMatrix::from_predictions(preds, labels)?;
    let positives = labels.iter().filter(|&&y| y == 1).count() as u64;
    Ok(EvalReport {
        model: ids.model.clone(),
        dataset: ids.dataset.clone(),
        split: ids.split.clone(),
        best_epoch: ids.best_epoch,
        samples: confusion.total(),
        positives,
        negatives: confusion.total() - positives,
        correct: confusion.correct(),
        accuracy: confusion.accuracy(),
        confusion,
    })
}

pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    data: &[Sample],
    ids: &ReportIds,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::usage("cannot evaluate on an empty split"));
    }
    report_from_predictions(ids, &predictions(model, data)?, &labels(data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub model_a: String,
    pub model_b: String,
    pub dataset: String,
    pub split: String,
    pub samples: u64,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub contingency: ContingencyTable,
    pub mcnemar: McNemar,
    pub alpha: f64,
    pub verdict: String,
}

pub fn compare_predictions(
    names: (&str, &str),
    dataset: &str,
    split: &str,
    preds_a: &[usize],
    preds_b: &[usize],
    labels: &[usize],
) -> Result<CompareReport> {
    let table = ContingencyTable::from_predictions(preds_a, preds_b, labels)?;
    let test = mcnemar(&table);
    let n = table.total();
    let acc = |right: u64| if n == 0 { 0.0 } else { right as f64 / n as f64 };
    let verdict = if test.significant(SIGNIFICANCE_LEVEL) {
        "significant"
    } else {
        "not significant"
    };
    Ok(CompareReport {
        model_a: names.0.into(),
        model_b: names.1.into(),
        dataset: dataset.into(),
        split: split.into(),
        samples: n,
        accuracy_a: acc(table.a + table.b),
        accuracy_b: acc(table.a + table.c),
        contingency: table,
        mcnemar: test,
        alpha: SIGNIFICANCE_LEVEL,
        verdict: verdict.into(),
    })
}

/// Pretty JSON followed by a newline.
pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// One JSON object per epoch.
pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for r in history {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
