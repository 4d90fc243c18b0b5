//! Patch anomaly scores, their slide-level aggregation and heatmaps.

mod aggregate;
mod heatmap;
mod knn;
mod table;

pub use aggregate::{aggregate_slide, aggregate_table, top_count, AggregationConfig};
pub use heatmap::{Colormap, HeatmapCanvas};
pub use knn::{knn_score, knn_scores, KnnConfig, KnnVariant};
pub use table::{read_slide_scores, write_slide_scores, ScoreRow, ScoreTable, SlideScore};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{score, MlpParams, Objective};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtaConfig {
    pub n_views: usize,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self { n_views: 10 }
    }
}

/// Probability of the anomalous class under a width-1 classifier head.
pub fn classifier_score(params: &MlpParams, x: &[f64]) -> Result<f64> {
    score(Objective::Bce, params, None, x)
}

/// Mean of the per-view scores of one patch. Uses a running mean, so a
/// list of identical scores returns that score exactly.
pub fn tta_score(view_scores: &[f64]) -> Result<f64> {
    if view_scores.is_empty() {
        return Err(Error::Empty("no view scores".into()));
    }
    let mut mean = 0.0;
    for (i, &s) in view_scores.iter().enumerate() {
        mean += (s - mean) / (i + 1) as f64;
    }
    Ok(mean)
}
