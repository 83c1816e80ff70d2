//! The experiment matrix: proportions × trials × models.

use std::fmt;
use std::fs;

use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, SmoteStage, ThresholdsMode};
use super::report;
use super::synthetic::{generate_synthetic, SyntheticSpec};
use crate::data::{
    class_counts, compute_thresholds, label_records, read_csv_file, smote, split, DatasetBundle,
    Label, PillarRecord, RawRecord, SplitSpec, Thresholds,
};
use crate::ensemble::{train_ensemble, EnsembleConfig, EnsembleModel};
use crate::metrics::ConfusionMatrix;
use crate::nn::{self, Activation, Mlp, MlpConfig, Monitor, TrainConfig, TrainResult};
use crate::seed::{derive_seed, stream};
use crate::{par, Error, Result, NUM_CLASSES, NUM_FEATURES};

/// Code of the F1 class, whose recall the F2 score emphasizes.
pub const F1_CLASS: usize = 1;

/// Column identity in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelKey {
    Single(Activation),
    Ensemble(f64),
}

impl ModelKey {
    /// `model` column of the results CSV.
    pub fn csv_model(&self) -> &'static str {
        match self {
            ModelKey::Single(a) => a.as_str(),
            ModelKey::Ensemble(_) => "ensemble",
        }
    }

    /// `bootstrap` column of the results CSV (empty for single models).
    pub fn csv_bootstrap(&self) -> String {
        match self {
            ModelKey::Single(_) => String::new(),
            ModelKey::Ensemble(f) => f.to_string(),
        }
    }

    pub fn from_csv(model: &str, bootstrap: &str) -> Result<Self> {
        if model == "ensemble" {
            let frac: f64 = bootstrap
                .parse()
                .map_err(|_| Error::Config(format!("bad bootstrap fraction `{bootstrap}`")))?;
            Ok(ModelKey::Ensemble(frac))
        } else {
            Ok(ModelKey::Single(model.parse()?))
        }
    }

    /// Display order: ReLU, ELU, GELU, then ensembles by fraction.
    pub fn rank(&self) -> (u8, u64) {
        match self {
            ModelKey::Single(a) => (
                0,
                Activation::ALL.iter().position(|x| x == a).unwrap_or(0) as u64,
            ),
            ModelKey::Ensemble(f) => (1, f.to_bits()),
        }
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKey::Single(a) => write!(f, "ANN-BP {}", a.display_name()),
            ModelKey::Ensemble(frac) => {
                write!(f, "Ensemble Learning ({}%)", (frac * 100.0).round())
            }
        }
    }
}

/// Test-partition metrics of one trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub accuracy: f64,
    /// F1 score per class code.
    pub f1: [f64; NUM_CLASSES],
    /// F2 score of the F1 class.
    pub f2_f1: f64,
}

impl TrialMetrics {
    pub fn from_predictions(y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        let cm = ConfusionMatrix::from_pairs(y_true, y_pred)?;
        let mut f1 = [0.0; NUM_CLASSES];
        for (c, v) in f1.iter_mut().enumerate() {
            *v = cm.f_beta(c, 1.0);
        }
        Ok(TrialMetrics {
            accuracy: cm.accuracy()?,
            f1,
            f2_f1: cm.f_beta(F1_CLASS, 2.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: ModelKey,
    pub proportion: u8,
    /// 1-based.
    pub trial: usize,
    pub metrics: TrialMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureRow {
    pub model: ModelKey,
    pub proportion: u8,
    pub trial: usize,
    pub error: String,
}

/// Labeled data shared by every cell of a run.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub raws: Vec<RawRecord>,
    pub thresholds: Thresholds,
    /// Labeled originals.
    pub labeled: Vec<PillarRecord>,
    /// Records fed to the splitter: SMOTE output for `pre-split`, the
    /// labeled originals otherwise.
    pub pool: Vec<PillarRecord>,
}

impl PreparedData {
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        class_counts(&self.labeled)
    }
}

pub fn load_raw(cfg: &ExperimentConfig) -> Result<Vec<RawRecord>> {
    match &cfg.data_source {
        DataSource::Synthetic => generate_synthetic(&SyntheticSpec {
            seed: cfg.master_seed,
            counts: cfg.synthetic_counts,
        }),
        DataSource::Csv(path) => read_csv_file(path),
    }
}

pub fn resolve_thresholds(cfg: &ExperimentConfig, raws: &[RawRecord]) -> Result<Thresholds> {
    match cfg.thresholds_mode {
        ThresholdsMode::Published => Ok(Thresholds::PUBLISHED),
        ThresholdsMode::Recompute => {
            let pairs = raws
                .iter()
                .map(|r| Ok((r.outcome, crate::data::safety_factor(r)?)))
                .collect::<Result<Vec<_>>>()?;
            compute_thresholds(&pairs, &cfg.threshold_options)
        }
    }
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let raws = load_raw(cfg)?;
    let thresholds = resolve_thresholds(cfg, &raws)?;
    let labeled = label_records(&raws, &thresholds)?;
    let pool = match cfg.smote_stage {
        SmoteStage::PreSplit => smote(
            &labeled,
            cfg.smote_k,
            derive_seed(cfg.master_seed, &[stream::SMOTE]),
        )?,
        SmoteStage::TrainOnly => labeled.clone(),
    };
    Ok(PreparedData {
        raws,
        thresholds,
        labeled,
        pool,
    })
}

/// Seed root of one (proportion, trial) cell.
pub fn cell_seed(cfg: &ExperimentConfig, proportion: u8, trial: usize) -> u64 {
    derive_seed(
        cfg.master_seed,
        &[
            stream::PROPORTION,
            u64::from(proportion),
            stream::TRIAL,
            trial as u64,
        ],
    )
}

pub fn split_seed(cfg: &ExperimentConfig, proportion: u8, trial: usize) -> u64 {
    if cfg.fixed_split {
        derive_seed(
            cfg.master_seed,
            &[stream::PROPORTION, u64::from(proportion), stream::SPLIT],
        )
    } else {
        derive_seed(cell_seed(cfg, proportion, trial), &[stream::SPLIT])
    }
}

/// Split (and, for `train-only`, oversample) the pool for one cell.
pub fn build_bundle(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    proportion: u8,
    trial: usize,
) -> Result<DatasetBundle> {
    let spec = SplitSpec::proportion(proportion, split_seed(cfg, proportion, trial))?;
    let mut bundle = split(&data.pool, &spec)?;
    if cfg.smote_stage == SmoteStage::TrainOnly {
        let seed = derive_seed(cell_seed(cfg, proportion, trial), &[stream::SMOTE]);
        bundle.train = smote(&bundle.train, cfg.smote_k, seed)?;
        // synthetic ids must not collide with validation or test ids
        let first_free = data.pool.iter().map(|r| r.id).max().map_or(0, |m| m + 1);
        for (r, id) in bundle
            .train
            .iter_mut()
            .filter(|r| r.synthetic)
            .zip(first_free..)
        {
            r.id = id;
        }
    }
    bundle.refit_standardizer(cfg.standardize);
    Ok(bundle)
}

pub fn arch_config(cfg: &ExperimentConfig, activation: Activation, init_seed: u64) -> MlpConfig {
    MlpConfig {
        input_dim: NUM_FEATURES,
        hidden_dims: cfg.training.hidden_dims.clone(),
        output_dim: NUM_CLASSES,
        activation,
        elu_alpha: cfg.training.elu_alpha,
        init_seed,
    }
}

/// Early stopping on validation loss when a validation set exists,
/// otherwise on training accuracy.
pub fn train_config(
    cfg: &ExperimentConfig,
    has_validation: bool,
    shuffle_seed: u64,
) -> TrainConfig {
    let t = &cfg.training;
    TrainConfig {
        batch_size: t.batch_size,
        max_epochs: t.max_epochs,
        patience: t.patience,
        monitor: if has_validation {
            Monitor::ValLoss
        } else {
            Monitor::TrainAccuracy
        },
        optimizer: t.optimizer,
        learning_rate: t.learning_rate,
        shuffle_seed,
        ..TrainConfig::default()
    }
}

pub fn train_single(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
    activation: Activation,
    cell: u64,
) -> Result<TrainResult> {
    let index = Activation::ALL
        .iter()
        .position(|&a| a == activation)
        .unwrap_or(0) as u64;
    let init = derive_seed(cell, &[stream::MODEL, index, stream::INIT]);
    let shuffle = derive_seed(cell, &[stream::MODEL, index, stream::SHUFFLE]);
    let model = Mlp::init(&arch_config(cfg, activation, init))?;
    nn::train(
        model,
        bundle,
        &train_config(cfg, bundle.validation.is_some(), shuffle),
    )
}

pub fn ensemble_config(
    cfg: &ExperimentConfig,
    has_validation: bool,
    frac: f64,
    cell: u64,
) -> EnsembleConfig {
    EnsembleConfig {
        bootstrap_frac: frac,
        base_train: train_config(cfg, has_validation, 0),
        base_arch: arch_config(cfg, Activation::Relu, 0),
        master_seed: derive_seed(cell, &[stream::BOOTSTRAP, frac.to_bits()]),
    }
}

pub fn train_cell_ensemble(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
    frac: f64,
    cell: u64,
) -> Result<EnsembleModel> {
    train_ensemble(
        bundle,
        &ensemble_config(cfg, bundle.validation.is_some(), frac, cell),
    )
}

/// Models evaluated in every cell, in report order.
pub fn model_keys(cfg: &ExperimentConfig) -> Vec<ModelKey> {
    let mut keys: Vec<ModelKey> = Activation::ALL
        .iter()
        .map(|&a| ModelKey::Single(a))
        .collect();
    keys.extend(cfg.bootstrap_fracs.iter().map(|&f| ModelKey::Ensemble(f)));
    keys
}

fn run_job(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
    key: ModelKey,
    cell: u64,
) -> Result<TrialMetrics> {
    let (x, y) = bundle.design(&bundle.test);
    let preds = match key {
        ModelKey::Single(a) => train_single(cfg, bundle, a, cell)?
            .model
            .predict_batch(x.view())?,
        ModelKey::Ensemble(f) => {
            train_cell_ensemble(cfg, bundle, f, cell)?.predict_batch(x.view())?
        }
    };
    TrialMetrics::from_predictions(&y, &preds)
}

#[derive(Debug, Clone)]
pub struct MatrixOutcome {
    pub thresholds: Thresholds,
    pub class_counts: [usize; NUM_CLASSES],
    pub pool_counts: [usize; NUM_CLASSES],
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
}

/// Train and evaluate every (proportion, trial, model) job.
///
/// Jobs run on the rayon pool when the `parallel` feature is on; each one
/// derives all of its randomness from its own cell seed, and results are
/// collected in job order, so the outcome does not depend on scheduling.
/// Training divergence is recorded as a failure row; data or configuration
/// errors abort the run.
pub fn run_matrix(cfg: &ExperimentConfig) -> Result<MatrixOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;

    let cells: Vec<(u8, usize)> = cfg
        .proportions
        .iter()
        .flat_map(|&p| (1..=cfg.trials).map(move |t| (p, t)))
        .collect();
    let bundles = par::map(&cells, |&(p, t)| build_bundle(cfg, &data, p, t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let keys = model_keys(cfg);
    let jobs: Vec<(usize, ModelKey)> = (0..cells.len())
        .flat_map(|c| keys.iter().map(move |&k| (c, k)))
        .collect();
    let results = par::map(&jobs, |&(c, key)| {
        let (p, t) = cells[c];
        run_job(cfg, &bundles[c], key, cell_seed(cfg, p, t))
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&(c, model), result) in jobs.iter().zip(results) {
        let (proportion, trial) = cells[c];
        match result {
            Ok(metrics) => rows.push(ResultRow {
                model,
                proportion,
                trial,
                metrics,
            }),
            Err(e @ Error::Divergence { .. }) => failures.push(FailureRow {
                model,
                proportion,
                trial,
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(MatrixOutcome {
        thresholds: data.thresholds,
        class_counts: data.class_counts(),
        pool_counts: class_counts(&data.pool),
        rows,
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub outcome: MatrixOutcome,
    pub files: Vec<std::path::PathBuf>,
}

impl ExperimentSummary {
    /// True when jobs ran but every one of them diverged.
    pub fn all_failed(&self) -> bool {
        self.outcome.rows.is_empty() && !self.outcome.failures.is_empty()
    }
}

/// Run the matrix and write every report into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let outcome = run_matrix(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let header = report_header(cfg, &outcome);
    let mut files = Vec::new();
    let config_path = dir.join("config.toml");
    fs::write(&config_path, cfg.to_toml_string()?).map_err(|e| Error::io(&config_path, e))?;
    files.push(config_path);
    files.push(report::write_results_csv(dir, &header, &outcome.rows)?);
    files.push(report::write_failures_csv(dir, &header, &outcome.failures)?);
    files.extend(report::render_reports(
        dir,
        &header,
        &outcome.rows,
        outcome.failures.len(),
    )?);
    Ok(ExperimentSummary { outcome, files })
}

fn report_header(cfg: &ExperimentConfig, outcome: &MatrixOutcome) -> Vec<String> {
    let names: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
    vec![
        cfg.header_line(),
        format!(
            "thresholds: t_failed={} t_intact={} | classes {:?} before SMOTE {:?}, splitter pool {:?}",
            outcome.thresholds.t_failed, outcome.thresholds.t_intact, names, outcome.class_counts, outcome.pool_counts
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_key_csv_round_trip() {
        for key in [ModelKey::Single(Activation::Elu), ModelKey::Ensemble(0.8)] {
            assert_eq!(
                ModelKey::from_csv(key.csv_model(), &key.csv_bootstrap()).unwrap(),
                key
            );
        }
        assert_eq!(
            ModelKey::Ensemble(0.7).to_string(),
            "Ensemble Learning (70%)"
        );
        assert_eq!(
            ModelKey::Single(Activation::Gelu).to_string(),
            "ANN-BP GELU"
        );
        assert!(ModelKey::from_csv("tanh", "").is_err());
    }

    #[test]
    fn trial_metrics_from_predictions() {
        let m = TrialMetrics::from_predictions(&[0, 1, 2, 3, 1], &[0, 1, 2, 3, 0]).unwrap();
        assert!((m.accuracy - 0.8).abs() < 1e-15);
        assert_eq!(m.f1[2], 1.0);
        // class 1: P = 1, R = 0.5 -> F2 = 5*0.5/(4+0.5)
        assert!((m.f2_f1 - 2.5 / 4.5).abs() < 1e-15);
    }

    #[test]
    fn seeds_are_cell_specific() {
        let cfg = ExperimentConfig::default();
        assert_ne!(cell_seed(&cfg, 1, 1), cell_seed(&cfg, 1, 2));
        assert_ne!(split_seed(&cfg, 2, 1), split_seed(&cfg, 2, 2));
        let fixed = ExperimentConfig {
            fixed_split: true,
            ..Default::default()
        };
        assert_eq!(split_seed(&fixed, 2, 1), split_seed(&fixed, 2, 2));
    }
}
