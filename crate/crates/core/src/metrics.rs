//! Confusion-matrix metrics and trial aggregation.
//!
//! Any ratio with a zero denominator is defined as 0 so per-class tables
//! stay total.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, NUM_CLASSES};

/// Rows are true class codes, columns predicted class codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs(y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::Dimension(format!(
                "{} true labels vs {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        let mut cm = ConfusionMatrix::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= NUM_CLASSES || p >= NUM_CLASSES {
                return Err(Error::Domain(format!(
                    "class code out of range: ({t}, {p})"
                )));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::InsufficientData(
                "accuracy of an empty confusion matrix".into(),
            )),
            total => Ok(self.trace() as f64 / total as f64),
        }
    }

    fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    /// One-vs-rest precision `TP / (TP + FP)`.
    pub fn precision(&self, class: usize) -> f64 {
        let predicted: u64 = (0..NUM_CLASSES).map(|t| self.counts[t][class]).sum();
        ratio(self.true_positives(class), predicted)
    }

    /// One-vs-rest recall `TP / (TP + FN)`.
    pub fn recall(&self, class: usize) -> f64 {
        let actual: u64 = self.counts[class].iter().sum();
        ratio(self.true_positives(class), actual)
    }

    pub fn f_beta(&self, class: usize, beta: f64) -> f64 {
        f_beta_from(self.precision(class), self.recall(class), beta)
    }

    pub fn class_metrics(&self, beta: f64) -> ClassMetrics {
        let mut m = ClassMetrics {
            beta,
            precision: [0.0; NUM_CLASSES],
            recall: [0.0; NUM_CLASSES],
            f1: [0.0; NUM_CLASSES],
            f_beta: [0.0; NUM_CLASSES],
        };
        for c in 0..NUM_CLASSES {
            m.precision[c] = self.precision(c);
            m.recall[c] = self.recall(c);
            m.f1[c] = self.f_beta(c, 1.0);
            m.f_beta[c] = self.f_beta(c, beta);
        }
        m
    }

    pub fn scaled(&self, k: u64) -> Self {
        let mut out = *self;
        out.counts.iter_mut().flatten().for_each(|c| *c *= k);
        out
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(1+β²)PR / (β²P + R)`, or 0 when the denominator vanishes.
pub fn f_beta_from(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den > 0.0 {
        (1.0 + b2) * precision * recall / den
    } else {
        0.0
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize]) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_pairs(y_true, y_pred)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.accuracy()
}

pub fn f_beta(cm: &ConfusionMatrix, class: usize, beta: f64) -> Result<f64> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::Domain(format!("beta must be > 0, got {beta}")));
    }
    if class >= NUM_CLASSES {
        return Err(Error::Domain(format!("class code {class} out of range")));
    }
    Ok(cm.f_beta(class, beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub beta: f64,
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
    pub f_beta: [f64; NUM_CLASSES],
}

/// Mean and sample standard deviation across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub mean: f64,
    /// `None` for a single trial.
    pub std: Option<f64>,
    pub count: usize,
}

pub fn aggregate(values: &[f64]) -> Result<TrialAggregate> {
    if values.is_empty() {
        return Err(Error::InsufficientData("aggregate of zero trials".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    Ok(TrialAggregate {
        mean,
        std,
        count: values.len(),
    })
}
