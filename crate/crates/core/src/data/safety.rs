//! Safety factor and label expansion.
//!
//! Pillar strength follows the coal-material constant 5.47 MPa with a
//! `w^0.8 / h` size/shape term; tributary-area stress is `25 H C^2 / w^2`
//! kPa. Stress is converted to MPa before taking the ratio.

use serde::{Deserialize, Serialize};

use super::{Label, Outcome, PillarRecord, RawRecord};
use crate::{Error, Result};

const COAL_STRENGTH_MPA: f64 = 5.47;
const OVERBURDEN_KPA_PER_M: f64 = 25.0;
const KPA_PER_MPA: f64 = 1000.0;

/// Pillar strength in MPa.
pub fn pillar_strength(width_m: f64, height_m: f64) -> Result<f64> {
    if !(width_m > 0.0 && height_m > 0.0) {
        return Err(Error::Domain(format!(
            "pillar strength needs w > 0 and h > 0 (got w={width_m}, h={height_m})"
        )));
    }
    Ok(COAL_STRENGTH_MPA * width_m.powf(0.8) / height_m)
}

/// Average pillar stress in MPa.
pub fn pillar_stress(depth_m: f64, width_m: f64, bord_m: f64) -> Result<f64> {
    if !(depth_m > 0.0 && width_m > 0.0 && bord_m >= 0.0) {
        return Err(Error::Domain(format!(
            "pillar stress needs H > 0, w > 0, bord >= 0 (got H={depth_m}, w={width_m}, bord={bord_m})"
        )));
    }
    let centre = width_m + bord_m;
    let kpa = OVERBURDEN_KPA_PER_M * depth_m * centre * centre / (width_m * width_m);
    Ok(kpa / KPA_PER_MPA)
}

pub fn safety_factor(record: &RawRecord) -> Result<f64> {
    let strength = pillar_strength(record.pillar_width_m, record.mining_height_m)?;
    let stress = pillar_stress(record.depth_m, record.pillar_width_m, record.bord_width_m)?;
    Ok(strength / stress)
}

/// SF boundaries separating "suitable" from "unsuitable" cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest SF at which a failed pillar still agrees with its SF.
    pub t_failed: f64,
    /// Smallest SF at which an intact pillar agrees with its SF.
    pub t_intact: f64,
    /// Standard-deviation multiplier used to derive the bounds.
    pub alpha: f64,
}

impl Thresholds {
    /// Bounds derived from the South African coal pillar database.
    pub const PUBLISHED: Thresholds = Thresholds {
        t_failed: 2.48,
        t_intact: 1.42,
        alpha: 1.0,
    };
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StdKind {
    /// `n - 1` divisor.
    #[default]
    Sample,
    /// `n` divisor.
    Population,
}

/// Sign applied to the intact bound: `mean - alpha*sd` (minimum threshold) or
/// `mean + alpha*sd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IntactSign {
    #[default]
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdOptions {
    pub alpha: f64,
    pub std_kind: StdKind,
    pub intact_sign: IntactSign,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            alpha: 1.0,
            std_kind: StdKind::Sample,
            intact_sign: IntactSign::Minus,
        }
    }
}

fn mean_std(values: &[f64], kind: StdKind) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let divisor = match kind {
        StdKind::Sample => n - 1.0,
        StdKind::Population => n,
    };
    (mean, (ss / divisor).sqrt())
}

/// Outlier-style thresholds from per-outcome SF statistics:
/// `t_failed = mean_F + alpha*sd_F` and `t_intact = mean_I ∓ alpha*sd_I`.
pub fn compute_thresholds(
    records: &[(Outcome, f64)],
    opts: &ThresholdOptions,
) -> Result<Thresholds> {
    let failed: Vec<f64> = records
        .iter()
        .filter(|(o, _)| *o == Outcome::Failed)
        .map(|&(_, sf)| sf)
        .collect();
    let intact: Vec<f64> = records
        .iter()
        .filter(|(o, _)| *o == Outcome::Intact)
        .map(|&(_, sf)| sf)
        .collect();
    if failed.len() < 2 || intact.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "threshold computation needs >= 2 records per outcome (failed: {}, intact: {})",
            failed.len(),
            intact.len()
        )));
    }
    let (mf, sf) = mean_std(&failed, opts.std_kind);
    let (mi, si) = mean_std(&intact, opts.std_kind);
    let t_intact = match opts.intact_sign {
        IntactSign::Minus => mi - opts.alpha * si,
        IntactSign::Plus => mi + opts.alpha * si,
    };
    Ok(Thresholds {
        t_failed: mf + opts.alpha * sf,
        t_intact,
        alpha: opts.alpha,
    })
}

/// Four-way label: failed pillars split at `SF <= t_failed`, intact pillars
/// at `SF >= t_intact`.
pub fn expand_label(outcome: Outcome, sf: f64, thresholds: &Thresholds) -> Label {
    match outcome {
        Outcome::Failed if sf <= thresholds.t_failed => Label::F0,
        Outcome::Failed => Label::F1,
        Outcome::Intact if sf >= thresholds.t_intact => Label::I0,
        Outcome::Intact => Label::I1,
    }
}

/// Compute SF and labels for every record; ids follow input order.
pub fn label_records(raws: &[RawRecord], thresholds: &Thresholds) -> Result<Vec<PillarRecord>> {
    raws.iter()
        .enumerate()
        .map(|(i, raw)| PillarRecord::from_raw(i as u64, raw, thresholds))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn raw(h_depth: f64, h: f64, bord: f64, w: f64) -> RawRecord {
        RawRecord {
            depth_m: h_depth,
            mining_height_m: h,
            bord_width_m: bord,
            pillar_width_m: w,
            outcome: Outcome::Failed,
        }
    }

    #[test]
    fn strength_examples() {
        assert_abs_diff_eq!(pillar_strength(1.0, 1.0).unwrap(), 5.47, epsilon = 1e-12);
        // mpmath: 5.47 * 6^0.8 / 3 = 7.64516867936...
        assert_abs_diff_eq!(pillar_strength(6.0, 3.0).unwrap(), 7.6452, epsilon = 1e-3);
        assert_abs_diff_eq!(
            pillar_strength(6.0, 3.0).unwrap(),
            7.645_168_679_361_077,
            epsilon = 1e-12
        );
        // mpmath: 5.47 * 10^0.8 / 5 = 6.90267334861...
        assert_abs_diff_eq!(pillar_strength(10.0, 5.0).unwrap(), 6.9027, epsilon = 1e-3);
        assert!(pillar_strength(0.0, 1.0).is_err());
        assert!(pillar_strength(1.0, -1.0).is_err());
    }

    #[test]
    fn stress_examples() {
        assert_abs_diff_eq!(
            pillar_stress(100.0, 6.0, 6.0).unwrap(),
            10.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(pillar_stress(40.0, 5.0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            pillar_stress(100.0, 0.0, 6.0),
            Err(Error::Domain(_))
        ));
        assert!(pillar_stress(0.0, 6.0, 6.0).is_err());
        assert!(pillar_stress(10.0, 6.0, -1.0).is_err());
    }

    #[test]
    fn safety_factor_examples() {
        assert_abs_diff_eq!(
            safety_factor(&raw(100.0, 3.0, 6.0, 6.0)).unwrap(),
            0.76452,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            safety_factor(&raw(40.0, 1.0, 0.0, 1.0)).unwrap(),
            5.47,
            epsilon = 1e-9
        );
        // H chosen so that stress equals strength: 25 H kPa = 5.47 MPa.
        assert_abs_diff_eq!(
            safety_factor(&raw(218.8, 1.0, 0.0, 1.0)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn safety_factor_units_identity() {
        for (hd, h, b, w) in [
            (100.0, 3.0, 6.0, 6.0),
            (250.0, 4.2, 7.5, 13.0),
            (33.0, 1.7, 0.0, 2.5),
        ] {
            let r = raw(hd, h, b, w);
            let c: f64 = w + b;
            let direct = pillar_strength(w, h).unwrap() * 1000.0 / (25.0 * hd * c * c / (w * w));
            assert_abs_diff_eq!(safety_factor(&r).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn thresholds_constant_classes() {
        let recs: Vec<_> = [
            (Outcome::Failed, 2.0),
            (Outcome::Failed, 2.0),
            (Outcome::Intact, 3.0),
            (Outcome::Intact, 3.0),
        ]
        .to_vec();
        let t = compute_thresholds(&recs, &ThresholdOptions::default()).unwrap();
        assert_abs_diff_eq!(t.t_failed, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.t_intact, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn thresholds_two_point_classes() {
        // mean 2, sample sd sqrt(2) for {1,3}; mean 3, sd sqrt(2) for {2,4}
        let recs = vec![
            (Outcome::Failed, 1.0),
            (Outcome::Failed, 3.0),
            (Outcome::Intact, 2.0),
            (Outcome::Intact, 4.0),
        ];
        let t = compute_thresholds(&recs, &ThresholdOptions::default()).unwrap();
        assert_abs_diff_eq!(t.t_failed, 3.41421, epsilon = 1e-5);
        assert_abs_diff_eq!(t.t_intact, 1.58579, epsilon = 1e-5);

        let pop = ThresholdOptions {
            std_kind: StdKind::Population,
            intact_sign: IntactSign::Plus,
            ..Default::default()
        };
        let t = compute_thresholds(&recs, &pop).unwrap();
        assert_abs_diff_eq!(t.t_failed, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.t_intact, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn thresholds_need_two_per_outcome() {
        let recs = vec![
            (Outcome::Failed, 1.0),
            (Outcome::Intact, 2.0),
            (Outcome::Intact, 4.0),
        ];
        assert!(matches!(
            compute_thresholds(&recs, &ThresholdOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn label_boundaries() {
        let t = Thresholds::PUBLISHED;
        assert_eq!(expand_label(Outcome::Failed, 2.48, &t), Label::F0);
        assert_eq!(expand_label(Outcome::Failed, 2.4801, &t), Label::F1);
        assert_eq!(expand_label(Outcome::Intact, 1.42, &t), Label::I0);
        assert_eq!(expand_label(Outcome::Intact, 1.4199, &t), Label::I1);
    }
}
