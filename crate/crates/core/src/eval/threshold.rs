//! Operating points that keep a target anomaly sensitivity.

use serde::{Deserialize, Serialize};

use super::auroc::LabeledScores;
use crate::error::{Error, Result};

pub const DEFAULT_SENSITIVITY_TARGETS: [f64; 3] = [1.00, 0.99, 0.95];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub target: f64,
    pub threshold: f64,
    /// Achieved sensitivity on the input sample.
    pub sensitivity: f64,
    /// Share of normal items scoring strictly below the threshold.
    pub automatable_fraction: f64,
}

/// Largest t with |{anomalous ≥ t}| / N_anom ≥ target.
pub fn sensitivity_threshold(data: &LabeledScores, target: f64) -> Result<ThresholdResult> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidInput(format!("target sensitivity must be in (0,1], got {target}")));
    }
    let (mut anom, norm) = data.split();
    if anom.is_empty() || norm.is_empty() {
        return Err(Error::SingleClass(format!(
            "threshold needs both classes, got {} anomalous and {} normal",
            anom.len(),
            norm.len()
        )));
    }
    anom.sort_by(|a, b| b.total_cmp(a));
    let n_a = anom.len();
    let mut i = 0;
    let (threshold, detected) = loop {
        let t = anom[i];
        let mut j = i;
        while j + 1 < n_a && anom[j + 1] == t {
            j += 1;
        }
        let count = j + 1;
        if count as f64 / n_a as f64 >= target || count == n_a {
            break (t, count);
        }
        i = j + 1;
    };
    let below = norm.iter().filter(|&&s| s < threshold).count();
    Ok(ThresholdResult {
        target,
        threshold,
        sensitivity: detected as f64 / n_a as f64,
        automatable_fraction: below as f64 / norm.len() as f64,
    })
}
