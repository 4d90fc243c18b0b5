//! Removal of auxiliary (outlier-exposure) rows that duplicate normal tissue.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OeFilterConfig {
    /// OE rows with similarity strictly above this to any normal row are dropped.
    pub cosine_threshold: f64,
}

impl Default for OeFilterConfig {
    fn default() -> Self {
        Self { cosine_threshold: 0.9 }
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Drops OE rows whose maximum cosine similarity to any normal row exceeds
/// the threshold. Exact all-pairs search, O(N·M·D); input order is kept.
pub fn dedup_oe(oe: &FeatureMatrix, normal: &FeatureMatrix, cfg: &OeFilterConfig) -> Result<FeatureMatrix> {
    if !(-1.0..=1.0).contains(&cfg.cosine_threshold) {
        return Err(Error::Config(format!(
            "cosine threshold {} outside [-1,1]",
            cfg.cosine_threshold
        )));
    }
    if oe.dim() != normal.dim() {
        return Err(Error::DimMismatch {
            expected: normal.dim(),
            actual: oe.dim(),
        });
    }
    let normal_norms: Vec<f64> = normal.rows().map(norm).collect();
    if normal_norms.contains(&0.0) {
        return Err(Error::ZeroVector);
    }
    let keep: Vec<bool> = (0..oe.len())
        .into_par_iter()
        .map(|i| {
            let row = oe.row(i);
            let n = norm(row);
            if n == 0.0 {
                return Err(Error::ZeroVector);
            }
            for (j, nrow) in normal.rows().enumerate() {
                if dot(row, nrow) / (n * normal_norms[j]) > cfg.cosine_threshold {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    let idx: Vec<usize> = keep.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
    Ok(oe.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_util::matrix;
    use crate::features::{Label, TissueClass};
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn identical_removed_orthogonal_kept() {
        let normal = matrix(&[&[1.0, 0.0, 0.0]], TissueClass::NormalTarget, Label::Normal);
        let oe = matrix(&[&[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], TissueClass::FarOe, Label::Anomalous);
        let out = dedup_oe(&oe, &normal, &OeFilterConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.row(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn tie_at_threshold_is_kept() {
        let normal = matrix(&[&[1.0, 0.0]], TissueClass::NormalTarget, Label::Normal);
        let oe = matrix(&[&[1.0, 1.0]], TissueClass::FarOe, Label::Anomalous);
        let sim = cosine_similarity(oe.row(0), normal.row(0)).unwrap();
        let out = dedup_oe(&oe, &normal, &OeFilterConfig { cosine_threshold: sim }).unwrap();
        assert_eq!(out.len(), 1);
    }

    fn brute_force(oe: &FeatureMatrix, normal: &FeatureMatrix, t: f64) -> Vec<Vec<f32>> {
        let mut kept = Vec::new();
        for i in 0..oe.len() {
            let mut max = f64::NEG_INFINITY;
            for j in 0..normal.len() {
                let (a, b) = (oe.row(i), normal.row(j));
                let d: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
                let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                max = max.max(d / (na * nb));
            }
            if max <= t {
                kept.push(oe.row(i).to_vec());
            }
        }
        kept
    }

    #[test]
    fn five_by_three_matches_brute_force() {
        let normal = matrix(
            &[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 1.0, 0.0], &[0.5, -0.5, 0.0, 1.0]],
            TissueClass::NormalTarget,
            Label::Normal,
        );
        let oe = matrix(
            &[
                &[1.0, 0.1, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[0.0, 1.0, 0.9, 0.1],
                &[-1.0, 0.0, 0.0, 0.0],
                &[0.4, -0.5, 0.1, 0.9],
            ],
            TissueClass::NearOe,
            Label::Anomalous,
        );
        let out = dedup_oe(&oe, &normal, &OeFilterConfig::default()).unwrap();
        let got: Vec<Vec<f32>> = out.rows().map(|r| r.to_vec()).collect();
        let expect = brute_force(&oe, &normal, 0.9);
        assert_eq!(got, expect);
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn dim_mismatch() {
        let a = matrix(&[&[1.0, 0.0]], TissueClass::NormalTarget, Label::Normal);
        let b = matrix(&[&[1.0]], TissueClass::FarOe, Label::Anomalous);
        assert!(dedup_oe(&b, &a, &OeFilterConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn subset_and_extremes(seed in any::<u64>(), n in 1usize..12, m in 1usize..8) {
            let mut rng = Rng::new(seed);
            let mut gen = |k: usize| {
                let rows: Vec<Vec<f32>> = (0..k).map(|_| (0..3).map(|_| rng.normal() as f32 + 0.01).collect()).collect();
                rows
            };
            let oe_rows = gen(n);
            let nr_rows = gen(m);
            let oe = matrix(&oe_rows.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), TissueClass::FarOe, Label::Anomalous);
            let normal = matrix(&nr_rows.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), TissueClass::NormalTarget, Label::Normal);
            let t = rng.uniform_range(-1.0, 1.0);
            let out = dedup_oe(&oe, &normal, &OeFilterConfig { cosine_threshold: t }).unwrap();
            prop_assert!(out.len() <= oe.len());
            let got: Vec<Vec<f32>> = out.rows().map(|r| r.to_vec()).collect();
            prop_assert_eq!(got, brute_force(&oe, &normal, t));
            let none = dedup_oe(&oe, &normal, &OeFilterConfig { cosine_threshold: -1.0 }).unwrap();
            // only rows exactly anti-parallel to every normal row could survive; random data has none
            prop_assert_eq!(none.len(), 0);
            let all = dedup_oe(&oe, &normal, &OeFilterConfig { cosine_threshold: 1.0 }).unwrap();
            prop_assert_eq!(all.len(), oe.len());
        }
    }
}
