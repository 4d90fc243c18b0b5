//! Slide score = mean of the highest-scoring fraction of its patches.

use serde::{Deserialize, Serialize};

use super::table::{ScoreRow, ScoreTable, SlideScore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    pub top_fraction: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self { top_fraction: 0.10 }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::Config(format!("top_fraction {} outside (0,1]", self.top_fraction)));
        }
        Ok(())
    }
}

/// `max(1, ceil(fraction · n))`, treating products within 1e-9 of an
/// integer as that integer so that e.g. 0.1 · 30 counts 3 patches, not 4.
pub fn top_count(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    let nearest = raw.round();
    let m = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (m as usize).clamp(1, n.max(1))
}

/// Mean of the `top_count` largest scores of one slide. Ties at the cutoff
/// are resolved by (score desc, x asc, y asc); the sum runs in that order.
pub fn aggregate_slide(rows: &[&ScoreRow], cfg: &AggregationConfig) -> Result<f64> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::Empty("slide has no patches".into()));
    }
    let m = top_count(rows.len(), cfg.top_fraction);
    let mut sorted: Vec<&ScoreRow> = rows.to_vec();
    let order = |a: &&ScoreRow, b: &&ScoreRow| {
        b.score
            .total_cmp(&a.score)
            .then(a.coord.x.cmp(&b.coord.x))
            .then(a.coord.y.cmp(&b.coord.y))
    };
    if m < sorted.len() {
        sorted.select_nth_unstable_by(m - 1, order);
        sorted.truncate(m);
    }
    sorted.sort_by(order);
    Ok(sorted.iter().map(|r| r.score).sum::<f64>() / m as f64)
}

/// Aggregates every slide of the table; slides in lexicographic order.
pub fn aggregate_table(table: &ScoreTable, cfg: &AggregationConfig) -> Result<Vec<SlideScore>> {
    table
        .by_slide()
        .into_iter()
        .map(|(slide, rows)| {
            Ok(SlideScore {
                slide_id: slide.to_string(),
                score: aggregate_slide(&rows, cfg)?,
            })
        })
        .collect()
}
