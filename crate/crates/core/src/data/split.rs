//! Stratified train/validation/test splitting and z-score standardization.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::PillarRecord;
use crate::seed;
use crate::{Error, Result, NUM_CLASSES, NUM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The four standard data proportions:
    /// 1 = 80/20, 2 = 70/30, 3 = 80/10/10, 4 = 70/15/15.
    pub fn proportion(index: u8, seed: u64) -> Result<Self> {
        let (tr, va, te) = match index {
            1 => (0.8, 0.0, 0.2),
            2 => (0.7, 0.0, 0.3),
            3 => (0.8, 0.1, 0.1),
            4 => (0.7, 0.15, 0.15),
            other => {
                return Err(Error::Config(format!(
                    "data proportion must be 1..=4, got {other}"
                )))
            }
        };
        SplitSpec::new(tr, va, te, seed)
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(format!(
                "split fractions must be >= 0: {fracs:?}"
            )));
        }
        if self.train_frac <= 0.0 || self.test_frac <= 0.0 {
            return Err(Error::Config("train and test fractions must be > 0".into()));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1: {fracs:?}"
            )));
        }
        Ok(())
    }

    pub fn has_validation(&self) -> bool {
        self.val_frac > 0.0
    }
}

/// Per-feature z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: [f64; NUM_FEATURES],
    pub stds: [f64; NUM_FEATURES],
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer {
            means: [0.0; NUM_FEATURES],
            stds: [1.0; NUM_FEATURES],
        }
    }

    /// Population mean/std of each feature. Constant columns keep std 1 so
    /// they map to zero instead of NaN.
    pub fn fit(records: &[PillarRecord]) -> Self {
        if records.is_empty() {
            return Self::identity();
        }
        let n = records.len() as f64;
        let mut means = [0.0; NUM_FEATURES];
        for r in records {
            for (m, x) in means.iter_mut().zip(&r.features) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = [0.0; NUM_FEATURES];
        for r in records {
            for ((s, x), m) in stds.iter_mut().zip(&r.features).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        for s in stds.iter_mut() {
            *s = (*s / n).sqrt();
            if *s <= f64::EPSILON {
                *s = 1.0;
            }
        }
        Standardizer { means, stds }
    }

    pub fn apply(&self, features: &[f64; NUM_FEATURES]) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (features[i] - self.means[i]) / self.stds[i];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train: Vec<PillarRecord>,
    pub validation: Option<Vec<PillarRecord>>,
    pub test: Vec<PillarRecord>,
    /// Fitted on `train` only.
    pub standardizer: Standardizer,
}

impl DatasetBundle {
    /// Build a bundle from explicit partitions, fitting standardization on
    /// the training set.
    pub fn new(
        train: Vec<PillarRecord>,
        validation: Option<Vec<PillarRecord>>,
        test: Vec<PillarRecord>,
    ) -> Self {
        let standardizer = Standardizer::fit(&train);
        DatasetBundle {
            train,
            validation,
            test,
            standardizer,
        }
    }

    /// Refit (or disable) standardization, e.g. after oversampling `train`.
    pub fn refit_standardizer(&mut self, enabled: bool) {
        self.standardizer = if enabled {
            Standardizer::fit(&self.train)
        } else {
            Standardizer::identity()
        };
    }

    pub fn partition(&self, which: Partition) -> Option<&[PillarRecord]> {
        match which {
            Partition::Train => Some(&self.train),
            Partition::Validation => self.validation.as_deref(),
            Partition::Test => Some(&self.test),
        }
    }

    /// Standardized feature matrix `[n x 5]` and class codes of `records`.
    pub fn design(&self, records: &[PillarRecord]) -> (Array2<f64>, Vec<usize>) {
        let mut x = Array2::zeros((records.len(), NUM_FEATURES));
        let mut y = Vec::with_capacity(records.len());
        for (mut row, r) in x.rows_mut().into_iter().zip(records) {
            for (dst, v) in row.iter_mut().zip(self.standardizer.apply(&r.features)) {
                *dst = v;
            }
            y.push(r.class_code());
        }
        (x, y)
    }
}

/// Stratified random split.
///
/// Within each class the members are shuffled and cut into
/// `round(test_frac*n)` test, `round(val_frac*n)` validation and the rest
/// training records; each partition is then shuffled so classes interleave.
pub fn split(records: &[PillarRecord], spec: &SplitSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, r) in records.iter().enumerate() {
        by_class[r.class_code()].push(i);
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (code, idx) in by_class.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let mut rng = seed::rng(seed::derive_seed(
            spec.seed,
            &[seed::stream::SPLIT, code as u64],
        ));
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_test = round_half_up(spec.test_frac * n).min(idx.len());
        let n_val = round_half_up(spec.val_frac * n).min(idx.len() - n_test);
        if spec.has_validation() && n_val == 0 {
            return Err(Error::Config(format!(
                "class {code} ({} records) leaves an empty validation partition",
                idx.len()
            )));
        }
        test.extend_from_slice(&idx[..n_test]);
        val.extend_from_slice(&idx[n_test..n_test + n_val]);
        train.extend_from_slice(&idx[n_test + n_val..]);
    }

    let mut rng = seed::rng(seed::derive_seed(
        spec.seed,
        &[seed::stream::SPLIT, u64::MAX],
    ));
    for part in [&mut train, &mut val, &mut test] {
        part.shuffle(&mut rng);
    }
    let pick = |ix: &[usize]| ix.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(DatasetBundle::new(
        pick(&train),
        spec.has_validation().then(|| pick(&val)),
        pick(&test),
    ))
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}
