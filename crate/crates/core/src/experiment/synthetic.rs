//! Synthetic case histories with controlled class counts.
//!
//! Geometry is drawn uniformly from fixed ranges (non-physical stand-ins,
//! rounded to centimeters). The field outcome is Bernoulli with failure
//! log-odds `(H - 135)/20 - 1.5 ln SF`, so deep pillars and low safety
//! factors fail more often. Candidates are labeled with the published
//! thresholds and accepted until every class quota is filled.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{encode_label, expand_label, safety_factor, Outcome, RawRecord, Thresholds};
use crate::seed;
use crate::{Error, Result, NUM_CLASSES};

pub const MAX_DRAWS: usize = 1_000_000;

pub const WIDTH_RANGE: (f64, f64) = (2.0, 25.0);
pub const HEIGHT_RANGE: (f64, f64) = (1.0, 6.0);
pub const BORD_RANGE: (f64, f64) = (4.0, 8.0);
pub const DEPTH_RANGE: (f64, f64) = (20.0, 250.0);

/// Pre-balancing class distribution of the South African database.
pub const DEFAULT_COUNTS: [usize; NUM_CLASSES] = [70, 16, 312, 25];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Target count per class code (F0, F1, I0, I1).
    pub counts: [usize; NUM_CLASSES],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            counts: DEFAULT_COUNTS,
        }
    }
}

fn centimeters(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn failure_probability(depth: f64, sf: f64) -> f64 {
    let logit = (depth - 135.0) / 20.0 - 1.5 * sf.ln();
    1.0 / (1.0 + (-logit).exp())
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<RawRecord>> {
    let mut rng = seed::rng(seed::derive_seed(spec.seed, &[0x5359_4e54]));
    let mut filled = [0usize; NUM_CLASSES];
    let total: usize = spec.counts.iter().sum();
    let mut out = Vec::with_capacity(total);
    let mut draws = 0usize;
    let thresholds = Thresholds::PUBLISHED;
    while out.len() < total {
        if draws >= MAX_DRAWS {
            let missing: Vec<String> = (0..NUM_CLASSES)
                .filter(|&c| filled[c] < spec.counts[c])
                .map(|c| format!("class {c}: {}/{}", filled[c], spec.counts[c]))
                .collect();
            return Err(Error::Generation(format!(
                "targets unreachable after {MAX_DRAWS} draws ({})",
                missing.join(", ")
            )));
        }
        draws += 1;
        let mut uniform = |(lo, hi): (f64, f64)| centimeters(rng.gen_range(lo..=hi));
        let candidate = RawRecord {
            pillar_width_m: uniform(WIDTH_RANGE),
            mining_height_m: uniform(HEIGHT_RANGE),
            bord_width_m: uniform(BORD_RANGE),
            depth_m: uniform(DEPTH_RANGE),
            outcome: Outcome::Intact,
        };
        let sf = safety_factor(&candidate)?;
        let outcome = if rng.gen::<f64>() < failure_probability(candidate.depth_m, sf) {
            Outcome::Failed
        } else {
            Outcome::Intact
        };
        let code = encode_label(expand_label(outcome, sf, &thresholds));
        if filled[code] < spec.counts[code] {
            filled[code] += 1;
            out.push(RawRecord {
                outcome,
                ..candidate
            });
        }
    }
    Ok(out)
}
