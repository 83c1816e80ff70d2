//! Bagged ensemble of the three activation variants.
//!
//! Each member trains on its own bootstrap resample of the training
//! partition; predictions are combined by majority vote, and a three-way
//! disagreement resolves to the smallest class code (F0).

use std::fs;
use std::path::Path;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{round_half_up, DatasetBundle, PillarRecord, Standardizer};
use crate::nn::{
    self, Activation, LabeledView, Mlp, MlpConfig, SavedModel, StopReason, TrainConfig,
};
use crate::seed::{self, stream};
use crate::{par, Error, Result, NUM_CLASSES};

/// Fixed member count; the tie rule is only well defined for three voters.
pub const MEMBERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub bootstrap_frac: f64,
    pub base_train: TrainConfig,
    /// Activation and init seed are overridden per member.
    pub base_arch: MlpConfig,
    pub master_seed: u64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bootstrap_frac > 0.0 && self.bootstrap_frac <= 1.0) {
            return Err(Error::Config(format!(
                "bootstrap fraction must be in (0, 1], got {}",
                self.bootstrap_frac
            )));
        }
        self.base_arch.validate()
    }
}

/// Seeds of one member, derived from `(master_seed, member index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSeeds {
    pub bootstrap: u64,
    pub init: u64,
    pub shuffle: u64,
}

pub fn member_seeds(master_seed: u64, member: usize) -> MemberSeeds {
    let m = member as u64;
    MemberSeeds {
        bootstrap: seed::derive_seed(master_seed, &[stream::MEMBER, m, stream::BOOTSTRAP]),
        init: seed::derive_seed(master_seed, &[stream::MEMBER, m, stream::INIT]),
        shuffle: seed::derive_seed(master_seed, &[stream::MEMBER, m, stream::SHUFFLE]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberProvenance {
    pub activation: Activation,
    pub seeds: MemberSeeds,
    pub sample_size: usize,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    /// ReLU, ELU, GELU in that order.
    pub members: Vec<Mlp>,
    pub provenance: Vec<MemberProvenance>,
    pub bootstrap_frac: f64,
    pub standardizer: Standardizer,
}

/// Anything that maps a standardized feature vector to a class code.
pub trait Classifier {
    fn classify(&self, features: &[f64]) -> Result<usize>;
}

impl Classifier for Mlp {
    fn classify(&self, features: &[f64]) -> Result<usize> {
        self.predict(features)
    }
}

/// `round_half_up(frac * n)`, at least one draw.
pub fn bootstrap_size(n: usize, frac: f64) -> usize {
    round_half_up(frac * n as f64).max(1)
}

/// Uniform draws with replacement.
pub fn bootstrap_sample<T: Clone>(train: &[T], frac: f64, seed: u64) -> Result<Vec<T>> {
    if train.is_empty() {
        return Err(Error::InsufficientData(
            "cannot bootstrap an empty training set".into(),
        ));
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Config(format!(
            "bootstrap fraction must be in (0, 1], got {frac}"
        )));
    }
    let mut rng = seed::rng(seed);
    Ok((0..bootstrap_size(train.len(), frac))
        .map(|_| train[rng.gen_range(0..train.len())].clone())
        .collect())
}

/// Plurality of three votes; all-distinct resolves to the smallest code.
pub fn majority_vote(preds: [usize; MEMBERS]) -> usize {
    let [a, b, c] = preds;
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        a.min(b).min(c)
    }
}

/// Majority vote over any three classifiers.
pub fn vote<C: Classifier>(members: &[C], features: &[f64]) -> Result<usize> {
    if members.len() != MEMBERS {
        return Err(Error::Config(format!(
            "ensemble needs {MEMBERS} members, got {}",
            members.len()
        )));
    }
    let mut preds = [0; MEMBERS];
    for (p, m) in preds.iter_mut().zip(members) {
        *p = m.classify(features)?;
    }
    Ok(majority_vote(preds))
}

/// Train the three members independently (in parallel when enabled).
/// Validation and test partitions are used as-is, never resampled.
pub fn train_ensemble(bundle: &DatasetBundle, cfg: &EnsembleConfig) -> Result<EnsembleModel> {
    cfg.validate()?;
    let val = bundle.validation.as_ref().map(|v| bundle.design(v));
    let results = par::map(
        &Activation::ALL,
        |&activation| -> Result<(Mlp, MemberProvenance)> {
            let index = Activation::ALL
                .iter()
                .position(|&a| a == activation)
                .expect("member");
            let seeds = member_seeds(cfg.master_seed, index);
            let sample: Vec<PillarRecord> =
                bootstrap_sample(&bundle.train, cfg.bootstrap_frac, seeds.bootstrap)?;
            let (x, y) = bundle.design(&sample);
            let arch = MlpConfig {
                activation,
                init_seed: seeds.init,
                ..cfg.base_arch.clone()
            };
            let tc = TrainConfig {
                shuffle_seed: seeds.shuffle,
                ..cfg.base_train.clone()
            };
            let trained = nn::fit(
                Mlp::init(&arch)?,
                LabeledView { x: x.view(), y: &y },
                val.as_ref().map(|(vx, vy)| LabeledView {
                    x: vx.view(),
                    y: vy,
                }),
                &tc,
            )
            .map_err(|e| match e {
                Error::Divergence { epoch, .. } => Error::Divergence {
                    epoch,
                    member: Some(activation.to_string()),
                },
                other => other,
            })?;
            let provenance = MemberProvenance {
                activation,
                seeds,
                sample_size: sample.len(),
                epochs_run: trained.epochs_run,
                stop_reason: trained.stop_reason,
            };
            Ok((trained.model, provenance))
        },
    );

    let mut members = Vec::with_capacity(MEMBERS);
    let mut provenance = Vec::with_capacity(MEMBERS);
    for r in results {
        let (m, p) = r?;
        members.push(m);
        provenance.push(p);
    }
    Ok(EnsembleModel {
        members,
        provenance,
        bootstrap_frac: cfg.bootstrap_frac,
        standardizer: bundle.standardizer.clone(),
    })
}

impl EnsembleModel {
    /// Vote on one standardized feature vector.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        vote(&self.members, features)
    }

    /// Vote on every row of a standardized batch.
    pub fn predict_batch(&self, batch: ArrayView2<f64>) -> Result<Vec<usize>> {
        let per_member = self
            .members
            .iter()
            .map(|m| m.predict_batch(batch))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..batch.nrows())
            .map(|i| majority_vote([per_member[0][i], per_member[1][i], per_member[2][i]]))
            .collect())
    }

    /// Save as a directory: one model file per member plus `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for (m, p) in self.members.iter().zip(&self.provenance) {
            let name = format!("member_{}.json", p.activation);
            SavedModel {
                mlp: m.clone(),
                standardizer: self.standardizer.clone(),
            }
            .save(&dir.join(&name))?;
            files.push(name);
        }
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: crate::VERSION.into(),
            bootstrap_frac: self.bootstrap_frac,
            members: files,
            provenance: self.provenance.clone(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != MANIFEST_FORMAT || manifest.members.len() != MEMBERS {
            return Err(Error::Model("not a three-member ensemble manifest".into()));
        }
        let mut members = Vec::with_capacity(MEMBERS);
        let mut standardizer = None;
        for (name, (p, want)) in manifest
            .members
            .iter()
            .zip(manifest.provenance.iter().zip(Activation::ALL))
        {
            let saved = SavedModel::load(&dir.join(name))?;
            if saved.mlp.activation != want || p.activation != want {
                return Err(Error::Model(format!(
                    "member `{name}` is not the {want} member"
                )));
            }
            if saved.mlp.output_dim() != NUM_CLASSES {
                return Err(Error::Model(format!(
                    "member `{name}` has {} outputs",
                    saved.mlp.output_dim()
                )));
            }
            standardizer.get_or_insert(saved.standardizer);
            members.push(saved.mlp);
        }
        Ok(EnsembleModel {
            members,
            provenance: manifest.provenance,
            bootstrap_frac: manifest.bootstrap_frac,
            standardizer: standardizer.expect("three members loaded"),
        })
    }
}

const MANIFEST_FORMAT: &str = "pillar-ensemble";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: String,
    bootstrap_frac: f64,
    members: Vec<String>,
    provenance: Vec<MemberProvenance>,
}
