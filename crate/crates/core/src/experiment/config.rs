use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synthetic::DEFAULT_COUNTS;
use crate::data::{ThresholdOptions, DEFAULT_K};
use crate::nn::OptimizerKind;
use crate::{Error, Result, NUM_CLASSES};

/// `synthetic` or a CSV path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum DataSource {
    Synthetic,
    Csv(PathBuf),
}

impl From<String> for DataSource {
    fn from(s: String) -> Self {
        if s == "synthetic" {
            DataSource::Synthetic
        } else {
            DataSource::Csv(PathBuf::from(s))
        }
    }
}

impl From<DataSource> for String {
    fn from(d: DataSource) -> Self {
        d.to_string()
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Synthetic => f.write_str("synthetic"),
            DataSource::Csv(p) => write!(f, "{}", p.display()),
        }
    }
}

/// When oversampling happens relative to the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoteStage {
    /// Oversample the whole labeled dataset once, then split.
    PreSplit,
    /// Split first, oversample only the training partition.
    TrainOnly,
}

impl FromStr for SmoteStage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre-split" => Ok(SmoteStage::PreSplit),
            "train-only" => Ok(SmoteStage::TrainOnly),
            other => Err(Error::Config(format!("unknown SMOTE stage `{other}`"))),
        }
    }
}

impl SmoteStage {
    pub fn as_str(self) -> &'static str {
        match self {
            SmoteStage::PreSplit => "pre-split",
            SmoteStage::TrainOnly => "train-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdsMode {
    Published,
    /// Mean ± alpha·sd of each outcome's SF on the ingested data.
    Recompute,
}

impl FromStr for ThresholdsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "published" => Ok(ThresholdsMode::Published),
            "recompute" => Ok(ThresholdsMode::Recompute),
            other => Err(Error::Config(format!("unknown thresholds mode `{other}`"))),
        }
    }
}

impl ThresholdsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdsMode::Published => "published",
            ThresholdsMode::Recompute => "recompute",
        }
    }
}

/// Network and optimizer settings shared by every model in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub hidden_dims: Vec<usize>,
    pub elu_alpha: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        TrainingSettings {
            hidden_dims: vec![512, 256, 256, 128],
            elu_alpha: 1.0,
            batch_size: 16,
            max_epochs: 400,
            patience: 10,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
        }
    }
}

/// A full experiment description. Serialized as TOML; the first eight
/// fields are the core matrix definition, the rest tune the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data_source: DataSource,
    /// Data proportion indices 1..=4.
    pub proportions: Vec<u8>,
    pub trials: usize,
    pub bootstrap_fracs: Vec<f64>,
    pub master_seed: u64,
    pub smote_stage: SmoteStage,
    pub thresholds_mode: ThresholdsMode,
    pub output_dir: PathBuf,

    pub smote_k: usize,
    /// z-score features using training statistics.
    pub standardize: bool,
    /// Reuse one split per proportion across trials instead of reseeding it.
    pub fixed_split: bool,
    /// Class counts for the synthetic generator.
    pub synthetic_counts: [usize; NUM_CLASSES],
    pub threshold_options: ThresholdOptions,
    pub training: TrainingSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_source: DataSource::Synthetic,
            proportions: vec![1, 2, 3, 4],
            trials: 10,
            bootstrap_fracs: vec![0.7, 0.8, 0.9],
            master_seed: 0,
            smote_stage: SmoteStage::PreSplit,
            thresholds_mode: ThresholdsMode::Published,
            output_dir: PathBuf::from("results"),
            smote_k: DEFAULT_K,
            standardize: true,
            fixed_split: false,
            synthetic_counts: DEFAULT_COUNTS,
            threshold_options: ThresholdOptions::default(),
            training: TrainingSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.proportions.is_empty() {
            return Err(Error::Config(
                "at least one data proportion is required".into(),
            ));
        }
        if let Some(p) = self.proportions.iter().find(|p| !(1..=4).contains(*p)) {
            return Err(Error::Config(format!(
                "data proportion must be 1..=4, got {p}"
            )));
        }
        let mut seen = self.proportions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.proportions.len() {
            return Err(Error::Config("duplicate data proportion".into()));
        }
        if let Some(f) = self
            .bootstrap_fracs
            .iter()
            .find(|f| !(**f > 0.0 && **f <= 1.0))
        {
            return Err(Error::Config(format!(
                "bootstrap fraction must be in (0, 1], got {f}"
            )));
        }
        if self.smote_k == 0 {
            return Err(Error::Config("smote_k must be >= 1".into()));
        }
        let t = &self.training;
        if t.batch_size == 0 || t.max_epochs == 0 || t.hidden_dims.contains(&0) {
            return Err(Error::Config(
                "batch size, epochs and layer widths must be >= 1".into(),
            ));
        }
        if !(t.learning_rate.is_finite() && t.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "invalid learning rate {}",
                t.learning_rate
            )));
        }
        Ok(())
    }

    /// One-line summary stamped into report headers.
    pub fn header_line(&self) -> String {
        format!(
            "pillar {} | master_seed={} | data={} | proportions={:?} | trials={} | bootstrap={:?} | smote_stage={} | thresholds={} | standardize={} | fixed_split={}",
            crate::VERSION,
            self.master_seed,
            self.data_source,
            self.proportions,
            self.trials,
            self.bootstrap_fracs,
            self.smote_stage.as_str(),
            self.thresholds_mode.as_str(),
            self.standardize,
            self.fixed_split,
        )
    }
}
