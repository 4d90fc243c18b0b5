//! Area under the ROC curve via the Mann–Whitney rank statistic.

use crate::error::{Error, Result};

/// Scores with binary ground truth and an optional diagnosis group per item.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    pub anomalous: Vec<bool>,
    pub groups: Vec<Option<String>>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, anomalous: Vec<bool>) -> Result<Self> {
        let groups = vec![None; scores.len()];
        Self::with_groups(scores, anomalous, groups)
    }

    pub fn with_groups(scores: Vec<f64>, anomalous: Vec<bool>, groups: Vec<Option<String>>) -> Result<Self> {
        if scores.len() != anomalous.len() || scores.len() != groups.len() {
            return Err(Error::DimMismatch {
                expected: scores.len(),
                actual: anomalous.len().min(groups.len()),
            });
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite score {s}")));
        }
        Ok(Self {
            scores,
            anomalous,
            groups,
        })
    }

    pub fn push(&mut self, score: f64, anomalous: bool, group: Option<String>) {
        self.scores.push(score);
        self.anomalous.push(anomalous);
        self.groups.push(group);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_anomalous(&self) -> usize {
        self.anomalous.iter().filter(|&&a| a).count()
    }

    pub fn n_normal(&self) -> usize {
        self.len() - self.n_anomalous()
    }

    pub(crate) fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut anom = Vec::new();
        let mut norm = Vec::new();
        for (&s, &a) in self.scores.iter().zip(&self.anomalous) {
            if a {
                anom.push(s);
            } else {
                norm.push(s);
            }
        }
        (anom, norm)
    }
}

/// Mid-ranks (1-based) with ties sharing the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean((i+1)..=(j+1))
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// P(score_anomalous > score_normal) + ½·P(equal).
pub fn auroc(data: &LabeledScores) -> Result<f64> {
    let n_a = data.n_anomalous();
    let n_n = data.n_normal();
    if n_a == 0 || n_n == 0 {
        return Err(Error::SingleClass(format!(
            "AUROC needs both classes, got {n_a} anomalous and {n_n} normal"
        )));
    }
    let ranks = average_ranks(&data.scores);
    let rank_sum: f64 = ranks.iter().zip(&data.anomalous).filter(|(_, &a)| a).map(|(r, _)| r).sum();
    let u = rank_sum - (n_a * (n_a + 1)) as f64 / 2.0;
    Ok(u / (n_a as f64 * n_n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn ls(scores: &[f64], labels: &[bool]) -> LabeledScores {
        LabeledScores::new(scores.to_vec(), labels.to_vec()).unwrap()
    }

    fn pairwise(data: &LabeledScores) -> f64 {
        let (a, n) = data.split();
        let mut wins = 0.0;
        for x in &a {
            for y in &n {
                if x > y {
                    wins += 1.0;
                } else if x == y {
                    wins += 0.5;
                }
            }
        }
        wins / (a.len() as f64 * n.len() as f64)
    }

    #[test]
    fn examples() {
        assert_eq!(auroc(&ls(&[0.0, 0.0, 1.0, 1.0], &[false, false, true, true])).unwrap(), 1.0);
        assert_eq!(auroc(&ls(&[0.3; 6], &[false, true, false, true, true, false])).unwrap(), 0.5);
        assert_eq!(auroc(&ls(&[0.1, 0.4, 0.4, 0.8], &[false, false, true, true])).unwrap(), 0.875);
    }

    #[test]
    fn single_class_error() {
        assert!(matches!(auroc(&ls(&[0.1, 0.2], &[true, true])), Err(Error::SingleClass(_))));
        assert!(LabeledScores::new(vec![f64::NAN], vec![true]).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[0.5, 0.1, 0.5, 0.9]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    proptest! {
        #[test]
        fn matches_pairwise_and_symmetry(seed in any::<u64>(), n in 2usize..120, levels in 1usize..30) {
            let mut rng = Rng::new(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 * 0.1).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.4).collect();
            labels[0] = true;
            labels[1] = false;
            let d = ls(&scores, &labels);
            let a = auroc(&d).unwrap();
            prop_assert_eq!(a, pairwise(&d));
            let neg = ls(&scores.iter().map(|s| -s).collect::<Vec<_>>(), &labels);
            prop_assert!((a + auroc(&neg).unwrap() - 1.0).abs() < 1e-15);
            // strictly monotone transform
            let t = ls(&scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect::<Vec<_>>(), &labels);
            prop_assert_eq!(auroc(&t).unwrap(), a);
        }
    }
}
