//! Slide-level cross-validation splits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, Rng};

pub const DEFAULT_FOLDS: usize = 5;

/// Assignment of normal slides to test folds. Anomalous slides are never
/// trained on and belong to every fold's test set, so they do not appear here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn test_slides(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn train_slides(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles the ids on the fold stream of `seed`, then deals them round-robin.
pub fn make_folds(normal_slide_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let unique: BTreeSet<&String> = normal_slide_ids.iter().collect();
    if unique.len() != normal_slide_ids.len() {
        return Err(Error::InvalidInput("duplicate slide ids in fold input".into()));
    }
    if normal_slide_ids.len() < k {
        return Err(Error::InvalidInput(format!(
            "too few slides for {k} folds: {}",
            normal_slide_ids.len()
        )));
    }
    // Sort first so the plan does not depend on input order.
    let mut ids: Vec<String> = unique.into_iter().cloned().collect();
    Rng::with_stream(seed, streams::FOLDS).shuffle(&mut ids);
    let assignments = ids.into_iter().enumerate().map(|(i, id)| (id, i % k)).collect();
    Ok(FoldPlan { k, seed, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("slide{i:03}")).collect()
    }

    #[test]
    fn sizes() {
        assert_eq!(make_folds(&ids(10), 5, 1).unwrap().fold_sizes(), vec![2; 5]);
        let mut s = make_folds(&ids(11), 5, 1).unwrap().fold_sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(make_folds(&ids(20), 5, 7).unwrap(), make_folds(&ids(20), 5, 7).unwrap());
        assert_ne!(make_folds(&ids(20), 5, 7).unwrap(), make_folds(&ids(20), 5, 8).unwrap());
    }

    #[test]
    fn too_few() {
        assert!(make_folds(&ids(4), 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition(n in 5usize..60, k in 2usize..6, seed in any::<u64>()) {
            let plan = make_folds(&ids(n), k, seed).unwrap();
            let mut seen = BTreeSet::new();
            for f in 0..k {
                for id in plan.test_slides(f) {
                    prop_assert!(seen.insert(id.to_string()));
                }
                prop_assert_eq!(plan.test_slides(f).len() + plan.train_slides(f).len(), n);
            }
            prop_assert_eq!(seen, ids(n).into_iter().collect::<BTreeSet<_>>());
            let s = plan.fold_sizes();
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        }
    }
}
