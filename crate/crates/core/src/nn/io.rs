//! Self-describing JSON model files.
//!
//! Floats are written with shortest round-trip formatting and parsed back
//! exactly, so a loaded model predicts bit-identically.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, Mlp};
use crate::data::Standardizer;
use crate::{Error, Result};

const FORMAT: &str = "pillar-mlp";

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `[fan_out x fan_in]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: String,
    input_dim: usize,
    hidden_dims: Vec<usize>,
    output_dim: usize,
    activation: Activation,
    elu_alpha: f64,
    standardizer: Standardizer,
    layers: Vec<LayerFile>,
}

/// A trained network together with the feature transform it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub mlp: Mlp,
    pub standardizer: Standardizer,
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: FORMAT.into(),
            version: crate::VERSION.into(),
            input_dim: self.mlp.input_dim(),
            hidden_dims: self.mlp.hidden_dims(),
            output_dim: self.mlp.output_dim(),
            activation: self.mlp.activation,
            elu_alpha: self.mlp.elu_alpha,
            standardizer: self.standardizer.clone(),
            layers: self
                .mlp
                .layers
                .iter()
                .map(|l| LayerFile {
                    fan_in: l.fan_in(),
                    fan_out: l.fan_out(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT {
            return Err(Error::Model(format!(
                "unexpected format tag `{}`",
                file.format
            )));
        }
        let mut expected_in = file.input_dim;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, l) in file.layers.into_iter().enumerate() {
            if l.fan_in != expected_in {
                return Err(Error::Model(format!(
                    "layer {i} fan_in {} does not chain from {expected_in}",
                    l.fan_in
                )));
            }
            let weights = Array2::from_shape_vec((l.fan_out, l.fan_in), l.weights)
                .map_err(|e| Error::Model(format!("layer {i} weights: {e}")))?;
            if l.bias.len() != l.fan_out {
                return Err(Error::Model(format!(
                    "layer {i} bias has {} entries",
                    l.bias.len()
                )));
            }
            expected_in = l.fan_out;
            layers.push(Dense {
                weights,
                bias: Array1::from(l.bias),
            });
        }
        let mlp = Mlp {
            layers,
            activation: file.activation,
            elu_alpha: file.elu_alpha,
        };
        if mlp.layers.is_empty()
            || mlp.output_dim() != file.output_dim
            || mlp.hidden_dims() != file.hidden_dims
        {
            return Err(Error::Model(
                "layer shapes disagree with the declared architecture".into(),
            ));
        }
        Ok(SavedModel {
            mlp,
            standardizer: file.standardizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Standardize raw features and predict.
    pub fn predict_raw(&self, features: &[f64; crate::NUM_FEATURES]) -> Result<usize> {
        self.mlp.predict(&self.standardizer.apply(features))
    }
}
