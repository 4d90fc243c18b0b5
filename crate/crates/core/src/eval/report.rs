//! Per-group breakdowns and the cross-validation report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::auroc::{auroc, LabeledScores};
use super::threshold::{sensitivity_threshold, ThresholdResult};
use crate::error::{Error, Result};

/// AUROC of each group's anomalies against all normals.
pub fn group_report(data: &LabeledScores) -> Result<BTreeMap<String, f64>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in data.groups.iter().enumerate() {
        if let Some(g) = g {
            groups.entry(g.as_str()).or_default().push(i);
        }
    }
    let normals: Vec<usize> = (0..data.len()).filter(|&i| !data.anomalous[i]).collect();
    let mut out = BTreeMap::new();
    for (g, idx) in groups {
        let anom: Vec<usize> = idx.into_iter().filter(|&i| data.anomalous[i]).collect();
        if anom.is_empty() {
            log::warn!("group {g:?} has no anomalous samples; skipped");
            continue;
        }
        let mut sub = LabeledScores::default();
        for &i in normals.iter().chain(&anom) {
            sub.push(data.scores[i], data.anomalous[i], None);
        }
        out.insert(g.to_string(), auroc(&sub)?);
    }
    Ok(out)
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("mean of no values".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub slide_auroc: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub patch_auroc: Option<f64>,
    pub groups: BTreeMap<String, f64>,
    pub thresholds: Vec<ThresholdResult>,
}

impl FoldResult {
    pub fn evaluate(fold: usize, slides: &LabeledScores, targets: &[f64]) -> Result<Self> {
        let thresholds = targets
            .iter()
            .map(|&t| sensitivity_threshold(slides, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fold,
            n_normal: slides.n_normal(),
            n_anomalous: slides.n_anomalous(),
            slide_auroc: auroc(slides)?,
            patch_auroc: None,
            groups: group_report(slides)?,
            thresholds,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub target: f64,
    pub threshold: MeanStd,
    pub automatable_fraction: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: Vec<FoldResult>,
    pub slide_auroc: MeanStd,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub patch_auroc: Option<MeanStd>,
    pub groups: BTreeMap<String, MeanStd>,
    pub thresholds: Vec<ThresholdSummary>,
}

impl EvalReport {
    /// Folds must share the same threshold targets, in the same order.
    pub fn from_folds(mut folds: Vec<FoldResult>) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::Empty("no folds to report".into()));
        }
        folds.sort_by_key(|f| f.fold);
        let aurocs: Vec<f64> = folds.iter().map(|f| f.slide_auroc).collect();
        let patch: Vec<f64> = folds.iter().filter_map(|f| f.patch_auroc).collect();
        let patch_auroc = if patch.len() == folds.len() {
            Some(MeanStd::of(&patch)?)
        } else {
            None
        };

        let mut per_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for f in &folds {
            for (g, &a) in &f.groups {
                per_group.entry(g.clone()).or_default().push(a);
            }
        }
        let groups = per_group
            .into_iter()
            .map(|(g, v)| MeanStd::of(&v).map(|m| (g, m)))
            .collect::<Result<_>>()?;

        let targets: Vec<f64> = folds[0].thresholds.iter().map(|t| t.target).collect();
        let mut thresholds = Vec::with_capacity(targets.len());
        for (i, &target) in targets.iter().enumerate() {
            let mut ts = Vec::new();
            let mut fr = Vec::new();
            for f in &folds {
                let r = f
                    .thresholds
                    .get(i)
                    .filter(|r| r.target == target)
                    .ok_or_else(|| Error::InvalidInput("folds disagree on threshold targets".into()))?;
                ts.push(r.threshold);
                fr.push(r.automatable_fraction);
            }
            thresholds.push(ThresholdSummary {
                target,
                threshold: MeanStd::of(&ts)?,
                automatable_fraction: MeanStd::of(&fr)?,
            });
        }

        Ok(Self {
            slide_auroc: MeanStd::of(&aurocs)?,
            patch_auroc,
            groups,
            thresholds,
            folds,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>10}", "fold", "slide AUROC");
        for f in &self.folds {
            let _ = writeln!(out, "{:<24} {:>10.4}", f.fold, f.slide_auroc);
        }
        let _ = writeln!(
            out,
            "{:<24} {:>10.4} ± {:.4}",
            "mean ± std", self.slide_auroc.mean, self.slide_auroc.std
        );
        if let Some(p) = &self.patch_auroc {
            let _ = writeln!(out, "{:<24} {:>10.4} ± {:.4}", "patch AUROC", p.mean, p.std);
        }
        if !self.groups.is_empty() {
            let _ = writeln!(out, "\n{:<24} {:>10}", "diagnosis group", "AUROC");
            for (g, m) in &self.groups {
                let _ = writeln!(out, "{:<24} {:>10.4} ± {:.4}", g, m.mean, m.std);
            }
        }
        if !self.thresholds.is_empty() {
            let _ = writeln!(out, "\n{:<24} {:>10}", "target sensitivity", "automatable");
            for t in &self.thresholds {
                let _ = writeln!(
                    out,
                    "{:<24} {:>10.4} ± {:.4}",
                    format!("{:.2}", t.target),
                    t.automatable_fraction.mean,
                    t.automatable_fraction.std
                );
            }
        }
        out
    }
}
