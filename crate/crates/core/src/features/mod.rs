//! Patch embeddings with per-row provenance, plus the outlier-exposure data
//! utilities that operate on them.

mod io;
mod manifest;
mod oe;
mod sampler;

pub use io::{read_features, read_features_expect_dim, write_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use manifest::{read_manifest, write_manifest, ManifestEntry};
pub use oe::{cosine_similarity, dedup_oe, OeFilterConfig};
pub use sampler::{sample_batch, OeSamplerConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiler::PatchCoord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TissueClass {
    NormalTarget,
    NearOe,
    FarOe,
    Eval,
}

impl std::str::FromStr for TissueClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal_target" => Ok(Self::NormalTarget),
            "near_oe" => Ok(Self::NearOe),
            "far_oe" => Ok(Self::FarOe),
            "eval" => Ok(Self::Eval),
            other => Err(Error::InvalidInput(format!("unknown tissue class {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Anomalous,
    Unknown,
}

impl Label {
    /// Binary target for classifier-style objectives (anomalous = 1).
    pub fn as_target(self) -> Option<u8> {
        match self {
            Label::Normal => Some(0),
            Label::Anomalous => Some(1),
            Label::Unknown => None,
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "anomalous" => Ok(Self::Anomalous),
            "unknown" => Ok(Self::Unknown),
            other => Err(Error::InvalidInput(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub slide_id: String,
    pub x: usize,
    pub y: usize,
    pub tissue_class: TissueClass,
    pub label: Label,
}

impl RowMeta {
    pub fn coord(&self) -> PatchCoord {
        PatchCoord::new(self.slide_id.clone(), self.x, self.y)
    }
}

/// N×D single-precision feature rows, row-major, with metadata per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f32>,
    meta: Vec<RowMeta>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f32>, meta: Vec<RowMeta>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("feature dimension must be positive".into()));
        }
        if data.len() != meta.len() * dim {
            return Err(Error::DimMismatch {
                expected: meta.len() * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data, meta })
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            dim,
            data: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn push(&mut self, row: &[f32], meta: RowMeta) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.meta.push(meta);
        Ok(())
    }

    /// Row `i` widened to f64.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    /// New matrix holding the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self::empty(self.dim);
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
            out.meta.push(self.meta[i].clone());
        }
        out
    }

    /// Keeps rows for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&RowMeta) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.meta[i])).collect();
        self.select(&idx)
    }

    /// Concatenates matrices of equal dimension.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|p| p.dim)
            .ok_or_else(|| Error::Empty("nothing to concatenate".into()))?;
        let mut out = Self::empty(dim);
        for p in parts {
            if p.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: p.dim,
                });
            }
            out.data.extend_from_slice(&p.data);
            out.meta.extend(p.meta.iter().cloned());
        }
        Ok(out)
    }

    pub fn set_label(&mut self, label: Label) {
        for m in &mut self.meta {
            m.label = label;
        }
    }

    /// Distinct slide ids in first-appearance order.
    pub fn slide_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.meta
            .iter()
            .filter(|m| seen.insert(m.slide_id.as_str()))
            .map(|m| m.slide_id.clone())
            .collect()
    }
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn construction_checks_shape() {
        assert!(FeatureMatrix::new(0, vec![], vec![]).is_err());
        let m = meta("a", 0, TissueClass::Eval, Label::Unknown);
        assert!(FeatureMatrix::new(2, vec![1.0], vec![m.clone()]).is_err());
        assert!(FeatureMatrix::new(2, vec![1.0, 2.0], vec![m]).is_ok());
    }

    #[test]
    fn select_and_concat() {
        let a = matrix(&[&[1.0, 2.0], &[3.0, 4.0]], TissueClass::NormalTarget, Label::Normal);
        let b = matrix(&[&[5.0, 6.0]], TissueClass::FarOe, Label::Anomalous);
        let c = FeatureMatrix::concat(&[&a, &b]).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.select(&[2, 0]).row(0), &[5.0, 6.0]);
        assert_eq!(c.filter(|m| m.label == Label::Normal).len(), 2);
        let d = matrix(&[&[1.0]], TissueClass::Eval, Label::Unknown);
        assert!(FeatureMatrix::concat(&[&a, &d]).is_err());
    }

    #[test]
    fn parse_enums() {
        assert_eq!("near_oe".parse::<TissueClass>().unwrap(), TissueClass::NearOe);
        assert_eq!("anomalous".parse::<Label>().unwrap(), Label::Anomalous);
        assert!("bogus".parse::<Label>().is_err());
    }
}
