//! Nearest-neighbour anomaly scores against a bank of normal features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnVariant {
    /// Mean Euclidean distance to the k nearest reference rows.
    MeanOfK,
    /// Distance to the k-th nearest reference row.
    KthDistance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    pub variant: KnnVariant,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 5,
            variant: KnnVariant::MeanOfK,
        }
    }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn check(query_dim: usize, reference: &FeatureMatrix, cfg: &KnnConfig) -> Result<()> {
    if cfg.k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if cfg.k > reference.len() {
        return Err(Error::Config(format!(
            "k = {} exceeds reference size {}",
            cfg.k,
            reference.len()
        )));
    }
    if query_dim != reference.dim() {
        return Err(Error::DimMismatch {
            expected: reference.dim(),
            actual: query_dim,
        });
    }
    Ok(())
}

fn score_unchecked(query: &[f32], reference: &FeatureMatrix, cfg: &KnnConfig) -> f64 {
    let mut d: Vec<f64> = reference.rows().map(|r| sq_dist(query, r)).collect();
    let k = cfg.k;
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
        d.truncate(k);
    }
    // fixed summation order, independent of reference permutation
    d.sort_by(f64::total_cmp);
    match cfg.variant {
        KnnVariant::MeanOfK => d.iter().map(|v| v.sqrt()).sum::<f64>() / k as f64,
        KnnVariant::KthDistance => d[k - 1].sqrt(),
    }
}

pub fn knn_score(query: &[f32], reference: &FeatureMatrix, cfg: &KnnConfig) -> Result<f64> {
    check(query.len(), reference, cfg)?;
    Ok(score_unchecked(query, reference, cfg))
}

/// Scores every row of `queries`, in parallel.
pub fn knn_scores(queries: &FeatureMatrix, reference: &FeatureMatrix, cfg: &KnnConfig) -> Result<Vec<f64>> {
    check(queries.dim(), reference, cfg)?;
    Ok((0..queries.len())
        .into_par_iter()
        .map(|i| score_unchecked(queries.row(i), reference, cfg))
        .collect())
}
