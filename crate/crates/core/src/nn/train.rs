//! Minibatch training with Adam and early stopping.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{argmax, cross_entropy, mean_cross_entropy, Dense, Gradients, Mlp};
use crate::data::DatasetBundle;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitor {
    /// Stop when epoch training accuracy stops strictly increasing.
    TrainAccuracy,
    /// Stop when validation loss stops strictly decreasing.
    ValLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub monitor: Monitor,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_epochs: 400,
            patience: 10,
            monitor: Monitor::TrainAccuracy,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, has_validation: bool) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size and max_epochs must be >= 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "invalid learning rate {}",
                self.learning_rate
            )));
        }
        if self.monitor == Monitor::ValLoss && !has_validation {
            return Err(Error::Config(
                "monitor=val-loss requires a validation set".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Running mean of per-sample loss over the epoch's minibatches.
    pub train_loss: f64,
    /// Running accuracy over the epoch's minibatches.
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Weights after the last completed epoch.
    pub model: Mlp,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
    pub stop_reason: StopReason,
}

/// Labelled design matrix.
#[derive(Debug, Clone, Copy)]
pub struct LabeledView<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [usize],
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<Dense>,
    second: Vec<Dense>,
}

impl Optimizer {
    fn new(model: &Mlp, tc: &TrainConfig) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: ndarray::Array1::zeros(l.bias.len()),
                })
                .collect::<Vec<_>>()
        };
        let adam = tc.optimizer == OptimizerKind::Adam;
        Optimizer {
            kind: tc.optimizer,
            lr: tc.learning_rate,
            beta1: tc.adam_beta1,
            beta2: tc.adam_beta2,
            epsilon: tc.adam_epsilon,
            step: 0,
            first: if adam { zeros() } else { Vec::new() },
            second: if adam { zeros() } else { Vec::new() },
        }
    }

    fn apply(&mut self, model: &mut Mlp, grads: &Gradients) {
        match self.kind {
            OptimizerKind::Sgd => {
                let lr = self.lr;
                for (p, g) in model.layers.iter_mut().zip(&grads.layers) {
                    p.weights.scaled_add(-lr, &g.weights);
                    p.bias.scaled_add(-lr, &g.bias);
                }
            }
            OptimizerKind::Adam => {
                self.step += 1;
                let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
                // bias correction folded into the step size
                let lr_t = self.lr * (1.0 - b2.powi(self.step)).sqrt() / (1.0 - b1.powi(self.step));
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr_t * *m / (v.sqrt() + eps);
                };
                for (((p, g), m), v) in model
                    .layers
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    Zip::from(&mut p.weights)
                        .and(&mut m.weights)
                        .and(&mut v.weights)
                        .and(&g.weights)
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                    Zip::from(&mut p.bias)
                        .and(&mut m.bias)
                        .and(&mut v.bias)
                        .and(&g.bias)
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                }
            }
        }
    }
}

/// Train on the bundle's (standardized) training partition.
pub fn train(model: Mlp, bundle: &DatasetBundle, tc: &TrainConfig) -> Result<TrainResult> {
    let (x, y) = bundle.design(&bundle.train);
    let val = bundle.validation.as_ref().map(|v| bundle.design(v));
    fit(
        model,
        LabeledView { x: x.view(), y: &y },
        val.as_ref().map(|(vx, vy)| LabeledView {
            x: vx.view(),
            y: vy,
        }),
        tc,
    )
}

/// Core epoch loop over explicit design matrices.
///
/// Each epoch reshuffles with a seed derived from `(shuffle_seed, epoch)`.
/// Training loss/accuracy are accumulated from the minibatch forward passes;
/// validation metrics are computed after the epoch. The monitored metric
/// must strictly improve within `patience` epochs or training stops; the
/// final weights are those of the last epoch.
pub fn fit(
    mut model: Mlp,
    train: LabeledView<'_>,
    val: Option<LabeledView<'_>>,
    tc: &TrainConfig,
) -> Result<TrainResult> {
    tc.validate(val.is_some())?;
    let n = train.y.len();
    if n == 0 || train.x.nrows() != n {
        return Err(Error::Dimension(format!(
            "training set has {} rows and {} labels",
            train.x.nrows(),
            n
        )));
    }

    let mut optimizer = Optimizer::new(&model, tc);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut best: Option<f64> = None;
    let mut wait = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=tc.max_epochs {
        let mut rng = seed::rng(seed::derive_seed(
            tc.shuffle_seed,
            &[seed::stream::EPOCH, epoch as u64],
        ));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(tc.batch_size) {
            let xb = train.x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| train.y[i]).collect();
            let trace = model.forward_trace(xb.view())?;
            for (row, &c) in trace.probs.rows().into_iter().zip(&yb) {
                loss_sum += cross_entropy(row.as_slice().expect("contiguous"), c)?;
                correct += usize::from(argmax(row) == c);
            }
            if !loss_sum.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    member: None,
                });
            }
            let grads = model.backward_from(&trace, &yb)?;
            optimizer.apply(&mut model, &grads);
        }
        if !model.is_finite() {
            return Err(Error::Divergence {
                epoch,
                member: None,
            });
        }

        let (val_loss, val_accuracy) = match val {
            Some(v) => {
                let probs = model.forward(v.x)?;
                let loss = mean_cross_entropy(&probs, v.y)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        member: None,
                    });
                }
                let hits = probs
                    .rows()
                    .into_iter()
                    .zip(v.y)
                    .filter(|(row, &c)| argmax(row.view()) == c)
                    .count();
                (Some(loss), Some(hits as f64 / v.y.len().max(1) as f64))
            }
            None => (None, None),
        };
        let record = EpochRecord {
            train_loss: loss_sum / n as f64,
            train_accuracy: correct as f64 / n as f64,
            val_loss,
            val_accuracy,
        };
        history.push(record);

        let (metric, improved) = match tc.monitor {
            Monitor::TrainAccuracy => {
                let m = record.train_accuracy;
                (m, best.is_none_or(|b| m > b))
            }
            Monitor::ValLoss => {
                let m = record.val_loss.expect("validated above");
                (m, best.is_none_or(|b| m < b))
            }
        };
        if improved {
            best = Some(metric);
            wait = 0;
        } else {
            wait += 1;
            if wait >= tc.patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }

    Ok(TrainResult {
        model,
        epochs_run: history.len(),
        history,
        stop_reason,
    })
}
