//! Case-history ingestion and preprocessing.
//!
//! Raw records carry the four measured geometry variables plus the field
//! outcome. [`PillarRecord`] adds the derived width-to-height ratio, the
//! safety factor and the expanded four-way label.

mod csv_io;
mod safety;
mod smote;
mod split;

use serde::{Deserialize, Serialize};

pub use csv_io::{format_sig, parse_csv, read_csv_file, write_labeled_csv, write_raw_csv};
pub use safety::{
    compute_thresholds, expand_label, label_records, pillar_strength, pillar_stress, safety_factor,
    IntactSign, StdKind, ThresholdOptions, Thresholds,
};
pub use smote::{smote, DEFAULT_K};
pub(crate) use split::round_half_up;
pub use split::{split, DatasetBundle, Partition, SplitSpec, Standardizer};

use crate::{Error, Result, NUM_CLASSES, NUM_FEATURES};

/// Field outcome of a case history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Intact,
    Failed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Intact => "intact",
            Outcome::Failed => "failed",
        }
    }
}

/// Expanded stability label.
///
/// `F0`/`I0` are failed/intact pillars whose safety factor agrees with the
/// observed outcome; `F1`/`I1` are the ones whose safety factor disagrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    F0,
    F1,
    I0,
    I1,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::F0, Label::F1, Label::I0, Label::I1];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::F0 => "F0",
            Label::F1 => "F1",
            Label::I0 => "I0",
            Label::I1 => "I1",
        }
    }

    pub fn outcome(self) -> Outcome {
        match self {
            Label::F0 | Label::F1 => Outcome::Failed,
            Label::I0 | Label::I1 => Outcome::Intact,
        }
    }
}

/// F0→0, F1→1, I0→2, I1→3.
pub fn encode_label(label: Label) -> usize {
    match label {
        Label::F0 => 0,
        Label::F1 => 1,
        Label::I0 => 2,
        Label::I1 => 3,
    }
}

pub fn decode_label(code: usize) -> Result<Label> {
    Label::ALL
        .get(code)
        .copied()
        .ok_or_else(|| Error::Domain(format!("class code {code} out of range 0..{NUM_CLASSES}")))
}

/// One case history as ingested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    /// Depth to floor `H`, meters.
    pub depth_m: f64,
    /// Mining height `h`, meters.
    pub mining_height_m: f64,
    /// Bord width, meters. Center distance is `pillar_width_m + bord_width_m`.
    pub bord_width_m: f64,
    /// Pillar width `w`, meters.
    pub pillar_width_m: f64,
    pub outcome: Outcome,
}

impl RawRecord {
    /// Checks the geometry invariants, returning the offending column name.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, &'static str)> {
        let checks = [
            ("depth_m", self.depth_m, false),
            ("mining_height_m", self.mining_height_m, false),
            ("bord_width_m", self.bord_width_m, true),
            ("pillar_width_m", self.pillar_width_m, false),
        ];
        for (name, value, allow_zero) in checks {
            if !value.is_finite() {
                return Err((name, "must be finite"));
            }
            if allow_zero && value < 0.0 {
                return Err((name, "must be >= 0"));
            }
            if !allow_zero && value <= 0.0 {
                return Err((name, "must be > 0"));
            }
        }
        Ok(())
    }

    /// `pillar_width / mining_height`.
    pub fn ratio(&self) -> f64 {
        self.pillar_width_m / self.mining_height_m
    }

    /// Feature vector in model order.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [
            self.pillar_width_m,
            self.mining_height_m,
            self.bord_width_m,
            self.depth_m,
            self.ratio(),
        ]
    }
}

/// Feature column names in model order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "pillar_width",
    "mining_height",
    "bord_width",
    "depth",
    "ratio",
];

/// A labeled, model-ready case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarRecord {
    /// Stable identity. Originals use their input row index; SMOTE output
    /// continues numbering after the largest input id.
    pub id: u64,
    pub synthetic: bool,
    /// Raw (unstandardized) features: pillar width, mining height, bord
    /// width, depth, ratio.
    pub features: [f64; NUM_FEATURES],
    pub sf: f64,
    pub label: Label,
}

impl PillarRecord {
    pub fn from_raw(id: u64, raw: &RawRecord, thresholds: &Thresholds) -> Result<Self> {
        let sf = safety_factor(raw)?;
        Ok(PillarRecord {
            id,
            synthetic: false,
            features: raw.features(),
            sf,
            label: expand_label(raw.outcome, sf, thresholds),
        })
    }

    pub fn class_code(&self) -> usize {
        encode_label(self.label)
    }
}

/// Per-class record counts indexed by class code.
pub fn class_counts(records: &[PillarRecord]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for r in records {
        counts[r.class_code()] += 1;
    }
    counts
}
