//! Coal pillar stability classification.
//!
//! The crate covers the full pipeline from raw mining case histories to
//! evaluated classifiers:
//!
//! - [`data`]: safety-factor computation, four-way label expansion, SMOTE
//!   balancing, stratified splitting and feature standardization.
//! - [`nn`]: a from-scratch multilayer perceptron (ReLU / ELU / GELU hidden
//!   layers, softmax output) trained by backpropagation with Adam and early
//!   stopping.
//! - [`ensemble`]: bagging over the three activation variants with a
//!   majority vote that breaks three-way ties toward the smallest class code.
//! - [`metrics`]: confusion matrices, accuracy, per-class F-beta and trial
//!   aggregation.
//! - [`experiment`]: the seeded experiment matrix, synthetic data generator
//!   and report writers.
//!
//! All randomness flows from explicit `u64` seeds through [`seed::derive_seed`],
//! so every result is reproducible and independent of thread scheduling.
//! With the default `parallel` feature, independent work items (experiment
//! cells, ensemble members, batch evaluation) run on the rayon pool.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod seed;
pub mod special;

pub use error::{Error, Result};

/// Crate version, stamped into every report header and model file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Number of input features: pillar width, mining height, bord width, depth, ratio.
pub const NUM_FEATURES: usize = 5;

/// Number of expanded stability classes (F0, F1, I0, I1).
pub const NUM_CLASSES: usize = 4;
