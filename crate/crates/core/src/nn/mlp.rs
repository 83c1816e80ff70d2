//! Dense feed-forward network with softmax output.
//!
//! Weights are stored `[fan_out x fan_in]`; a batch is a row-major
//! `[batch x features]` matrix, so a layer computes `Z = A W^T + b`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{activate, activate_derivative, Activation};
use crate::seed;
use crate::{Error, Result, NUM_CLASSES, NUM_FEATURES};

/// Probability floor inside the log of the cross-entropy.
pub const CE_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub elu_alpha: f64,
    pub init_seed: u64,
}

impl MlpConfig {
    /// 5-512-256-256-128-4.
    pub fn standard(activation: Activation, init_seed: u64) -> Self {
        MlpConfig {
            input_dim: NUM_FEATURES,
            hidden_dims: vec![512, 256, 256, 128],
            output_dim: NUM_CLASSES,
            activation,
            elu_alpha: 1.0,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config(format!(
                "all layer widths must be >= 1 (input {}, hidden {:?}, output {})",
                self.input_dim, self.hidden_dims, self.output_dim
            )));
        }
        if !self.elu_alpha.is_finite() {
            return Err(Error::Config("elu_alpha must be finite".into()));
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[fan_out x fan_in]`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    pub elu_alpha: f64,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `inputs[l]` is the input to layer `l` (`inputs[0]` is the batch).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations `Z` of every layer; the last entry holds the logits.
    pub pre_activations: Vec<Array2<f64>>,
    pub probs: Array2<f64>,
}

/// Parameter gradients, shaped like [`Mlp::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|g| {
                g.weights
                    .iter()
                    .chain(g.bias.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Max-subtracted softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `-ln(p[true_class] + 1e-12)`.
pub fn cross_entropy(probs: &[f64], true_class: usize) -> Result<f64> {
    let p = probs.get(true_class).ok_or_else(|| {
        Error::Domain(format!(
            "class index {true_class} out of range for {} classes",
            probs.len()
        ))
    })?;
    Ok(-(p + CE_CLIP).ln())
}

/// First index of the maximum; ties go to the smallest index.
pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed::derive_seed(config.init_seed, &[seed::stream::INIT]));
        let dims = config.dims();
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.gen_range(-limit..=limit)
                });
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Mlp {
            layers,
            activation: config.activation,
            elu_alpha: config.elu_alpha,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Dense::fan_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::fan_out)
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len().saturating_sub(1)]
            .iter()
            .map(Dense::fan_out)
            .collect()
    }

    pub fn config(&self, init_seed: u64) -> MlpConfig {
        MlpConfig {
            input_dim: self.input_dim(),
            hidden_dims: self.hidden_dims(),
            output_dim: self.output_dim(),
            activation: self.activation,
            elu_alpha: self.elu_alpha,
            init_seed,
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "batch has {} columns, model expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn apply_activation(&self, z: &Array2<f64>) -> Array2<f64> {
        let (kind, alpha) = (self.activation, self.elu_alpha);
        z.mapv(|v| activate(kind, alpha, v))
    }

    /// Forward pass keeping every intermediate.
    pub fn forward_trace(&self, batch: ArrayView2<f64>) -> Result<ForwardTrace> {
        self.check_batch(&batch)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut a = batch.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias;
            let next = if l < last {
                self.apply_activation(&z)
            } else {
                Array2::zeros((0, 0))
            };
            inputs.push(std::mem::replace(&mut a, next));
            pre_activations.push(z);
        }
        let mut probs = pre_activations[last].clone();
        for mut row in probs.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("owned rows are contiguous"));
        }
        Ok(ForwardTrace {
            inputs,
            pre_activations,
            probs,
        })
    }

    /// Class probabilities `[batch x output_dim]`.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let last = self.layers.len() - 1;
        let mut a = batch.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias;
            a = if l < last {
                self.apply_activation(&z)
            } else {
                z
            };
        }
        for mut row in a.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("owned rows are contiguous"));
        }
        Ok(a)
    }

    /// Gradients of the mean cross-entropy over the batch, from an existing trace.
    pub fn backward_from(&self, trace: &ForwardTrace, true_classes: &[usize]) -> Result<Gradients> {
        let batch = trace.probs.nrows();
        if true_classes.len() != batch {
            return Err(Error::Dimension(format!(
                "{} labels for a batch of {batch}",
                true_classes.len()
            )));
        }
        let classes = trace.probs.ncols();
        if let Some(&bad) = true_classes.iter().find(|&&c| c >= classes) {
            return Err(Error::Domain(format!(
                "class index {bad} out of range for {classes} classes"
            )));
        }

        let scale = 1.0 / batch as f64;
        let mut delta = trace.probs.clone();
        for (mut row, &c) in delta.rows_mut().into_iter().zip(true_classes) {
            row[c] -= 1.0;
        }
        delta *= scale;

        let (kind, alpha) = (self.activation, self.elu_alpha);
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let weights = delta.t().dot(&trace.inputs[l]);
            let bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.layers[l].weights);
                Zip::from(&mut upstream)
                    .and(&trace.pre_activations[l - 1])
                    .for_each(|d, &z| *d *= activate_derivative(kind, alpha, z));
                delta = upstream;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    pub fn backward(&self, batch: ArrayView2<f64>, true_classes: &[usize]) -> Result<Gradients> {
        if batch.nrows() != true_classes.len() {
            return Err(Error::Dimension(format!(
                "{} labels for a batch of {}",
                true_classes.len(),
                batch.nrows()
            )));
        }
        let trace = self.forward_trace(batch)?;
        self.backward_from(&trace, true_classes)
    }

    /// Mean cross-entropy over a labelled batch.
    pub fn loss(&self, batch: ArrayView2<f64>, true_classes: &[usize]) -> Result<f64> {
        if batch.nrows() != true_classes.len() {
            return Err(Error::Dimension("labels and batch differ in length".into()));
        }
        let probs = self.forward(batch)?;
        mean_cross_entropy(&probs, true_classes)
    }

    /// Class code for one feature vector.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        let row = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(argmax(self.forward(row)?.row(0)))
    }

    pub fn predict_batch(&self, batch: ArrayView2<f64>) -> Result<Vec<usize>> {
        let probs = self.forward(batch)?;
        Ok(probs.rows().into_iter().map(argmax).collect())
    }
}

pub(crate) fn mean_cross_entropy(probs: &Array2<f64>, true_classes: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for (row, &c) in probs.rows().into_iter().zip(true_classes) {
        total += cross_entropy(row.as_slice().expect("contiguous"), c)?;
    }
    Ok(total / true_classes.len().max(1) as f64)
}
