//! AUROC, cross-validation folds, sensitivity thresholds and reports.

mod annotations;
mod auroc;
mod folds;
mod report;
mod threshold;

pub use annotations::{
    parse_annotations, patch_labels_from_annotations, read_annotations, write_annotations, Annotation,
    AnnotationKind, PatchLabel, PatchLabels,
};
pub use auroc::{auroc, average_ranks, LabeledScores};
pub use folds::{make_folds, FoldPlan, DEFAULT_FOLDS};
pub use report::{group_report, EvalReport, FoldResult, MeanStd, ThresholdSummary};
pub use threshold::{sensitivity_threshold, ThresholdResult, DEFAULT_SENSITIVITY_TARGETS};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub folds: usize,
    pub sensitivity_targets: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            sensitivity_targets: DEFAULT_SENSITIVITY_TARGETS.to_vec(),
        }
    }
}
