//! Patch and slide score tables with CSV I/O.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::tiler::PatchCoord;

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub coord: PatchCoord,
    pub score: f64,
}

/// Per-patch anomaly scores with unique `(slide, x, y)` keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for r in &rows {
            if !r.score.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite score at {:?}", r.coord)));
            }
            if !seen.insert(&r.coord) {
                return Err(Error::InvalidInput(format!("duplicate patch {:?}", r.coord)));
            }
        }
        Ok(Self { rows })
    }

    /// Collapses repeated coordinates (augmented views of one patch) to the
    /// mean of their scores. Output follows first appearance.
    pub fn from_views(coords: &[PatchCoord], scores: &[f64]) -> Result<Self> {
        if coords.len() != scores.len() {
            return Err(Error::DimMismatch {
                expected: coords.len(),
                actual: scores.len(),
            });
        }
        let mut order: Vec<&PatchCoord> = Vec::new();
        let mut views: HashMap<&PatchCoord, Vec<f64>> = HashMap::new();
        for (c, &s) in coords.iter().zip(scores) {
            views
                .entry(c)
                .or_insert_with(|| {
                    order.push(c);
                    Vec::new()
                })
                .push(s);
        }
        let rows = order
            .into_iter()
            .map(|c| {
                Ok(ScoreRow {
                    coord: c.clone(),
                    score: super::tta_score(&views[c])?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows grouped by slide id, slides in lexicographic order.
    pub fn by_slide(&self) -> BTreeMap<&str, Vec<&ScoreRow>> {
        let mut out: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.coord.slide_id.as_str()).or_default().push(r);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slide_id", "x", "y", "score"])?;
        for r in &self.rows {
            w.write_record([
                r.coord.slide_id.as_str(),
                &r.coord.x.to_string(),
                &r.coord.y.to_string(),
                &sig9(r.score),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<score csv>", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Rec {
            slide_id: String,
            x: usize,
            y: usize,
            score: f64,
        }
        let mut r = csv::Reader::from_path(path)?;
        let rows = r
            .deserialize()
            .map(|rec| {
                let rec: Rec = rec?;
                Ok(ScoreRow {
                    coord: PatchCoord::new(rec.slide_id, rec.x, rec.y),
                    score: rec.score,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(rows)
    }
}

/// Slide-level score.
#[derive(Clone, Debug, PartialEq)]
pub struct SlideScore {
    pub slide_id: String,
    pub score: f64,
}

pub fn write_slide_scores<W: Write>(out: W, scores: &[SlideScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slide_id", "score"])?;
    for s in scores {
        w.write_record([s.slide_id.as_str(), &sig9(s.score)])?;
    }
    w.flush().map_err(|e| Error::io("<slide csv>", e))
}

pub fn read_slide_scores(path: &Path) -> Result<Vec<SlideScore>> {
    #[derive(Deserialize)]
    struct Rec {
        slide_id: String,
        score: f64,
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|rec| {
            let rec: Rec = rec?;
            Ok(SlideScore {
                slide_id: rec.slide_id,
                score: rec.score,
            })
        })
        .collect()
}
