//! Pathologist-style region annotations and patch ground truth.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiler::PatchCoord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    /// The region that carries the slide's diagnosis.
    DiagnosisDefining,
    /// Other abnormal tissue, e.g. tumor-adjacent changes.
    OtherAnomalous,
    /// Scanning or preparation artifact.
    Artifact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub polygon: Vec<[f64; 2]>,
}

impl Annotation {
    pub fn rect(kind: AnnotationKind, x: f64, y: f64, w: f64, h: f64) -> Self {
        Self {
            kind,
            polygon: vec![[x, y], [x + w, y], [x + w, y + h], [x, y + h], [x, y]],
        }
    }

    /// Vertices without a repeated closing point.
    fn ring(&self) -> &[[f64; 2]] {
        let p = &self.polygon;
        if p.len() > 1 && p.first() == p.last() {
            &p[..p.len() - 1]
        } else {
            p
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ring = self.ring();
        if ring.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} vertices", ring.len())));
        }
        if ring.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let area2: f64 = (0..ring.len())
            .map(|i| {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if area2 == 0.0 {
            return Err(Error::DegeneratePolygon("zero area".into()));
        }
        Ok(())
    }

    /// Even-odd containment; points on an edge or vertex count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let ring = self.ring();
        let n = ring.len();
        let mut inside = false;
        for i in 0..n {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            if on_segment(p, a, b) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if cross != 0.0 {
        return false;
    }
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

pub fn parse_annotations(json: &str) -> Result<Vec<Annotation>> {
    let anns: Vec<Annotation> = serde_json::from_str(json)?;
    for a in &anns {
        a.validate()?;
    }
    Ok(anns)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}

pub fn write_annotations(path: &Path, anns: &[Annotation]) -> Result<()> {
    let text = serde_json::to_string_pretty(anns)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchLabel {
    Normal,
    Anomalous,
    /// Left out of patch-level AUROC.
    Excluded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchLabels {
    pub labels: Vec<PatchLabel>,
    /// Whether each patch center lies in an artifact region.
    pub in_artifact: Vec<bool>,
}

/// Labels patches by where their center falls: inside a diagnosis-defining
/// region → anomalous; else inside another anomalous region → excluded;
/// else normal. Artifact membership is reported separately.
pub fn patch_labels_from_annotations(
    coords: &[PatchCoord],
    regions: &[Annotation],
    patch_size: usize,
) -> Result<PatchLabels> {
    for r in regions {
        r.validate()?;
    }
    let half = patch_size as f64 / 2.0;
    let mut labels = Vec::with_capacity(coords.len());
    let mut in_artifact = Vec::with_capacity(coords.len());
    for c in coords {
        let center = [c.x as f64 + half, c.y as f64 + half];
        let hit = |kind| regions.iter().any(|r| r.kind == kind && r.contains(center));
        labels.push(if hit(AnnotationKind::DiagnosisDefining) {
            PatchLabel::Anomalous
        } else if hit(AnnotationKind::OtherAnomalous) {
            PatchLabel::Excluded
        } else {
            PatchLabel::Normal
        });
        in_artifact.push(hit(AnnotationKind::Artifact));
    }
    Ok(PatchLabels { labels, in_artifact })
}
