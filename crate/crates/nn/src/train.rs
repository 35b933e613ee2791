//! Minibatch training with early stopping, and evaluation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Sample;
use crate::error::{NnError, Result};
use crate::layers::softmax_cross_entropy;
use crate::metrics::MetricsReport;
use crate::models::{argmax, Model};
use crate::optim::{Adam, TrainConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// NaN when there is no validation data.
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    TargetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were returned.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,trainLoss,trainAcc,valLoss,valAcc";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{},{}", r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc);
        }
        s
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.get(self.best_epoch.checked_sub(1)?)
    }
}

/// Patience counter on a metric where larger is better. A patience of 0
/// disables stopping.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None, stale: 0 }
    }

    /// Returns `(improved, stop)`.
    pub fn update(&mut self, metric: f64) -> (bool, bool) {
        let improved = self.best.map_or(true, |b| metric > b);
        if improved {
            self.best = Some(metric);
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        (improved, self.patience > 0 && self.stale >= self.patience)
    }
}

/// Mean loss and accuracy over a set of samples.
pub fn loss_and_accuracy<F: Real>(model: &Model<F>, samples: &[Sample<F>]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        let logits = model.forward(&s.input)?;
        loss += softmax_cross_entropy(logits.data(), s.label).0;
        correct += usize::from(argmax(logits.data()) == s.label);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains with Adam on softmax cross-entropy and returns the parameters
/// from the epoch with the best validation accuracy (training accuracy when
/// `val` is empty).
pub fn train<F: Real>(
    mut model: Model<F>,
    train: &[Sample<F>],
    val: &[Sample<F>],
    config: &TrainConfig,
) -> Result<(Model<F>, History)> {
    config.validate()?;
    if train.is_empty() {
        return Err(NnError::EmptySplit("train".into()));
    }
    for s in train.iter().chain(val) {
        model.check_input(&s.input)?;
        if s.label >= model.spec().num_classes {
            return Err(NnError::Config(format!("label {} out of range", s.label)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = {
        let params: Vec<_> = model.params().into_iter().map(|(_, t)| t).collect();
        Adam::new(config.clone(), &params)
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(config.early_stop_patience);
    let mut best = model.clone();
    let mut history = History { records: Vec::new(), best_epoch: 0, stop_reason: StopReason::MaxEpochs };

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads();
            for &i in batch {
                let (logits, trace) = model.forward_train(&train[i].input)?;
                let (loss, d) = softmax_cross_entropy(logits.data(), train[i].label);
                if !loss.is_finite() || !logits.all_finite() {
                    return Err(NnError::NonFiniteLoss { epoch, sample: i });
                }
                let d = crate::tensor::Tensor::new(logits.dims(), d)?;
                model.backward(&trace, &d, &mut grads)?;
            }
            let inv = F::from_f64(1.0 / batch.len() as f64);
            grads.iter_mut().for_each(|g| g.scale(inv));
            adam.step(model.params_mut(), &grads)?;
        }

        let (train_loss, train_acc) = loss_and_accuracy(&model, train)?;
        let (val_loss, val_acc) = loss_and_accuracy(&model, val)?;
        if !train_loss.is_finite() {
            return Err(NnError::NonFiniteLoss { epoch, sample: 0 });
        }
        history.records.push(EpochRecord { epoch, train_loss, train_acc, val_loss, val_acc });

        let metric = if val.is_empty() { train_acc } else { val_acc };
        let (improved, stop) = stopper.update(metric);
        if improved {
            best = model.clone();
            history.best_epoch = epoch;
        }
        if config.target_train_accuracy.is_some_and(|t| train_acc >= t) {
            history.stop_reason = StopReason::TargetReached;
            break;
        }
        if stop {
            history.stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    Ok((best, history))
}

/// Confusion-matrix metrics of `model` over `samples`.
pub fn evaluate<F: Real>(model: &Model<F>, samples: &[Sample<F>], split_name: &str) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(NnError::EmptySplit(split_name.into()));
    }
    let k = model.spec().num_classes;
    let pairs = samples.iter().map(|s| Ok((s.label, model.predict(&s.input)?))).collect::<Result<Vec<_>>>()?;
    if let Some(&(t, _)) = pairs.iter().find(|(t, _)| *t >= k) {
        return Err(NnError::Config(format!("label {t} out of range for {k} classes")));
    }
    Ok(MetricsReport::from_predictions(k, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_one_stops_on_first_regression() {
        let mut es = EarlyStopping::new(1);
        assert_eq!(es.update(0.9), (true, false));
        assert_eq!(es.update(0.8), (false, true));
    }

    #[test]
    fn patience_counts_stale_epochs() {
        let mut es = EarlyStopping::new(3);
        let seq = [0.1, 0.2, 0.2, 0.15, 0.3, 0.3, 0.3, 0.3];
        let stops: Vec<bool> = seq.iter().map(|&m| es.update(m).1).collect();
        assert_eq!(stops, [false, false, false, false, false, false, false, true]);
        let mut off = EarlyStopping::new(0);
        assert!((0..50).all(|_| !off.update(0.0).1));
    }

    #[test]
    fn csv_layout() {
        let h = History {
            records: vec![EpochRecord { epoch: 1, train_loss: 1.5, train_acc: 0.25, val_loss: 2.0, val_acc: 0.5 }],
            best_epoch: 1,
            stop_reason: StopReason::MaxEpochs,
        };
        assert_eq!(h.to_csv(), "epoch,trainLoss,trainAcc,valLoss,valAcc\n1,1.5,0.25,2,0.5\n");
    }
}
