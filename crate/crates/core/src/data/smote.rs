//! Synthetic minority oversampling.

use rand::Rng;

use super::{safety_factor, PillarRecord, RawRecord};
use crate::seed;
use crate::{Error, Result, NUM_CLASSES, NUM_FEATURES};

/// Neighbor count used when the caller has no preference.
pub const DEFAULT_K: usize = 5;

fn sq_dist(a: &[f64; NUM_FEATURES], b: &[f64; NUM_FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest same-class neighbors of every member
/// (Euclidean on raw features, ties broken by position).
fn neighbor_table(members: &[&PillarRecord], k: usize) -> Vec<Vec<usize>> {
    members
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut others: Vec<(f64, usize)> = members
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, b)| (sq_dist(&a.features, &b.features), j))
                .collect();
            others.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Oversample every class up to the majority-class count.
///
/// Originals are returned unchanged and in order, followed by the synthetic
/// records of each class in class-code order. A synthetic point is
/// `x + u * (x_nn - x)` with `x` a uniformly chosen member, `x_nn` one of its
/// `k` nearest neighbors and `u ~ U[0, 1)`. Labels are inherited; `sf` is
/// recomputed from the interpolated geometry for bookkeeping only.
pub fn smote(records: &[PillarRecord], k: usize, seed: u64) -> Result<Vec<PillarRecord>> {
    if k == 0 {
        return Err(Error::Config("SMOTE needs k >= 1".into()));
    }
    let mut by_class: [Vec<&PillarRecord>; NUM_CLASSES] = Default::default();
    for r in records {
        by_class[r.class_code()].push(r);
    }
    for (code, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "SMOTE needs >= 2 members in every class; class {code} has {}",
                members.len()
            )));
        }
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);

    let mut out = records.to_vec();
    let mut next_id = records.iter().map(|r| r.id).max().map_or(0, |m| m + 1);
    for (code, members) in by_class.iter().enumerate() {
        let needed = target - members.len();
        if needed == 0 {
            continue;
        }
        let k_eff = k.min(members.len() - 1);
        let neighbors = neighbor_table(members, k_eff);
        let mut rng = seed::rng(seed::derive_seed(seed, &[seed::stream::SMOTE, code as u64]));
        for _ in 0..needed {
            let base_idx = rng.gen_range(0..members.len());
            let nn_idx = neighbors[base_idx][rng.gen_range(0..k_eff)];
            let u: f64 = rng.gen();
            let base = members[base_idx];
            let nn = members[nn_idx];
            let mut features = [0.0; NUM_FEATURES];
            for (f, (x, y)) in features
                .iter_mut()
                .zip(base.features.iter().zip(&nn.features))
            {
                *f = x + u * (y - x);
            }
            let geometry = RawRecord {
                pillar_width_m: features[0],
                mining_height_m: features[1],
                bord_width_m: features[2],
                depth_m: features[3],
                outcome: base.label.outcome(),
            };
            out.push(PillarRecord {
                id: next_id,
                synthetic: true,
                features,
                sf: safety_factor(&geometry).unwrap_or(f64::NAN),
                label: base.label,
            });
            next_id += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{class_counts, Label};

    fn rec(id: u64, label: Label, f: [f64; 4]) -> PillarRecord {
        PillarRecord {
            id,
            synthetic: false,
            features: [f[0], f[1], f[2], f[3], f[0] / f[1]],
            sf: 1.0,
            label,
        }
    }

    fn dataset(majority: usize) -> Vec<PillarRecord> {
        let mut v = Vec::new();
        let mut id = 0;
        for (code, label) in Label::ALL.iter().enumerate() {
            let n = if code == 2 { majority } else { 2 };
            for j in 0..n {
                let s = 1.0 + j as f64 + code as f64 * 10.0;
                v.push(rec(
                    id,
                    *label,
                    [s, 1.0 + 0.5 * j as f64, 4.0 + j as f64, 50.0 + 7.0 * s],
                ));
                id += 1;
            }
        }
        v
    }

    fn pair_dataset() -> Vec<PillarRecord> {
        dataset(6)
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let data = dataset(2);
        assert_eq!(smote(&data, 5, 1).unwrap(), data);
    }

    #[test]
    fn two_member_classes_interpolate_on_segment() {
        let data = pair_dataset();
        let out = smote(&data, 5, 42).unwrap();
        assert_eq!(class_counts(&out), [6, 6, 6, 6]);
        assert_eq!(&out[..data.len()], &data[..]);
        for s in out.iter().filter(|r| r.synthetic) {
            let pair: Vec<_> = data.iter().filter(|r| r.label == s.label).collect();
            let (a, b) = (&pair[0].features, &pair[1].features);
            // solve for t along the first coordinate (distinct by construction)
            let t = (s.features[0] - a[0]) / (b[0] - a[0]);
            assert!((-1e-12..=1.0 + 1e-12).contains(&t));
            for d in 0..NUM_FEATURES {
                assert!((a[d] + t * (b[d] - a[d]) - s.features[d]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ids_are_unique_and_deterministic() {
        let data = pair_dataset();
        let a = smote(&data, 3, 9).unwrap();
        let b = smote(&data, 3, 9).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<_> = a.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), a.len());
        assert_ne!(a, smote(&data, 3, 10).unwrap());
    }

    #[test]
    fn singleton_class_is_an_error() {
        let mut data = pair_dataset();
        let pos = data.iter().position(|r| r.label == Label::F1).unwrap();
        data.remove(pos);
        assert!(matches!(
            smote(&data, 5, 0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            smote(&pair_dataset(), 0, 0),
            Err(Error::Config(_))
        ));
    }
}
