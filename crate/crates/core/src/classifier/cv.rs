use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate, train, Candidate, ClassifierError, TrainConfig};
use crate::features::FeatureVector;
use crate::sketch_io::keyed_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub best: Candidate,
    /// Mean fold accuracy per grid candidate, in grid order.
    pub table: Vec<(Candidate, f64)>,
}

/// Assigns every example a fold in `0..folds`. Each category is shuffled
/// (keyed by seed and category name) and dealt round-robin, continuing the
/// rotation from where the previous category stopped so fold sizes stay
/// balanced.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Result<Vec<usize>, ClassifierError> {
    if folds < 2 {
        return Err(ClassifierError::BadConfig("folds must be at least 2".into()));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(i);
    }
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for (cat, mut idx) in groups {
        if idx.len() < folds {
            return Err(ClassifierError::CategoryTooSmall {
                category: cat.to_string(),
                count: idx.len(),
                folds,
            });
        }
        idx.shuffle(&mut keyed_rng(seed, cat));
        for i in idx {
            assignment[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(assignment)
}

/// Grid search by stratified k-fold cross-validation. The best candidate has
/// the highest mean accuracy; ties go to the smaller C, then smaller gamma.
pub fn cross_validate(
    features: &[FeatureVector],
    labels: &[String],
    cfg: &TrainConfig,
) -> Result<CvReport, ClassifierError> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(ClassifierError::Empty);
    }
    if features.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let grid = cfg.grid_for(features[0].dim());
    let fold_of = stratified_folds(labels, cfg.folds, cfg.seed)?;

    let mut table = Vec::with_capacity(grid.len());
    for cand in grid {
        let fold_cfg = cfg.with_candidate(cand);
        let mut total = 0.0;
        for fold in 0..cfg.folds {
            let pick = |keep: bool| {
                let mut f = Vec::new();
                let mut l = Vec::new();
                for (i, &k) in fold_of.iter().enumerate() {
                    if (k == fold) != keep {
                        f.push(features[i].clone());
                        l.push(labels[i].clone());
                    }
                }
                (f, l)
            };
            let (train_f, train_l) = pick(true);
            let (test_f, test_l) = pick(false);
            let model = train(&train_f, &train_l, &fold_cfg)?;
            total += evaluate(&model, &test_f, &test_l)?.accuracy;
        }
        table.push((cand, total / cfg.folds as f64));
    }

    let gamma_key = |c: &Candidate| c.gamma.unwrap_or(f64::NEG_INFINITY);
    let best = table
        .iter()
        .min_by(|(a, acc_a), (b, acc_b)| {
            acc_b
                .total_cmp(acc_a)
                .then(a.c.total_cmp(&b.c))
                .then(gamma_key(a).total_cmp(&gamma_key(b)))
        })
        .map(|(c, _)| *c)
        .ok_or_else(|| ClassifierError::BadConfig("empty grid".into()))?;
    Ok(CvReport { best, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_per: &[(&str, usize)]) -> (Vec<FeatureVector>, Vec<String>) {
        let mut f = Vec::new();
        let mut l = Vec::new();
        for (k, &(name, n)) in n_per.iter().enumerate() {
            for i in 0..n {
                let angle = k as f64 * 2.1;
                let r = 3.0 + (i % 5) as f64 * 0.1;
                f.push(FeatureVector(vec![r * angle.cos(), r * angle.sin()]));
                l.push(name.to_string());
            }
        }
        (f, l)
    }

    #[test]
    fn single_candidate_wins() {
        let (f, l) = toy(&[("a", 10), ("b", 10)]);
        let cand = Candidate { c: 3.0, gamma: None };
        let cfg = TrainConfig {
            grid: vec![cand],
            ..Default::default()
        };
        let r = cross_validate(&f, &l, &cfg).unwrap();
        assert_eq!(r.best, cand);
        assert_eq!(r.table.len(), 1);
    }

    #[test]
    fn deterministic_grid_search() {
        let (f, l) = toy(&[("a", 12), ("b", 12)]);
        let cfg = TrainConfig {
            grid: vec![Candidate { c: 0.01, gamma: None }, Candidate { c: 100.0, gamma: None }],
            ..Default::default()
        };
        let a = cross_validate(&f, &l, &cfg).unwrap();
        assert_eq!(a, cross_validate(&f, &l, &cfg).unwrap());
        assert!(a.table.iter().all(|(_, acc)| (0.0..=1.0).contains(acc)));
        // Perfectly separable: both reach 1.0 and the smaller C wins the tie.
        assert_eq!(a.best.c, 0.01);
    }

    #[test]
    fn fold_proportions_follow_global() {
        let (_, l) = toy(&[("a", 23), ("b", 41), ("c", 17)]);
        let folds = stratified_folds(&l, 5, 9).unwrap();
        for cat in ["a", "b", "c"] {
            let total = l.iter().filter(|x| *x == cat).count() as f64;
            for k in 0..5 {
                let in_fold = folds.iter().zip(&l).filter(|(f, x)| **f == k && *x == cat).count() as f64;
                assert!((in_fold - total / 5.0).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn too_small_for_folds() {
        let (f, l) = toy(&[("a", 10), ("b", 3)]);
        assert!(matches!(
            cross_validate(&f, &l, &TrainConfig::default()).unwrap_err(),
            ClassifierError::CategoryTooSmall { count: 3, folds: 5, .. }
        ));
    }
}
