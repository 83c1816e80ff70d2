//! From-scratch multilayer perceptron.

mod activation;
mod io;
mod mlp;
mod train;

pub use activation::{activate, activate_derivative, Activation};
pub use io::SavedModel;
pub use mlp::{
    argmax, cross_entropy, softmax, Dense, ForwardTrace, Gradients, Mlp, MlpConfig, CE_CLIP,
};
pub use train::{
    fit, train, EpochRecord, LabeledView, Monitor, OptimizerKind, StopReason, TrainConfig,
    TrainResult,
};
