//! End-to-end composition: fit a scorer, score patches, aggregate slides and
//! run slide-level cross-validation.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::config::{Method, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{auroc, make_folds, EvalReport, FoldResult, LabeledScores};
use crate::features::{dedup_oe, FeatureMatrix, Label};
use crate::models::{train, Objective, TrainOutput, TrainedModel, TrainingPools};
use crate::scoring::{aggregate_table, knn_scores, ScoreTable};

/// Drops near-duplicates of normal rows from the auxiliary pools, then trains.
pub fn train_head(
    cfg: &PipelineConfig,
    objective: Objective,
    seed: u64,
    normal: &FeatureMatrix,
    near: Option<&FeatureMatrix>,
    far: Option<&FeatureMatrix>,
) -> Result<TrainOutput> {
    let mut tc = cfg.training(objective);
    tc.seed = seed;
    if !objective.uses_outlier_exposure() {
        return train(
            TrainingPools {
                normal,
                near: None,
                far: None,
            },
            &tc,
        );
    }
    let missing = || Error::Config(format!("{objective} needs near and far outlier pools"));
    let near = dedup_oe(near.ok_or_else(missing)?, normal, &cfg.oe_filter)?;
    let far = dedup_oe(far.ok_or_else(missing)?, normal, &cfg.oe_filter)?;
    log::info!(
        "training {objective} on {} normal, {} near, {} far rows",
        normal.len(),
        near.len(),
        far.len()
    );
    train(
        TrainingPools {
            normal,
            near: Some(&near),
            far: Some(&far),
        },
        &tc,
    )
}

/// A fitted patch scorer.
#[derive(Clone, Debug)]
pub enum Scorer {
    /// kNN against a bank of normal features.
    Knn { reference: FeatureMatrix },
    Head(TrainedModel),
    /// kNN in the embedding space of a trained head; `reference` is already
    /// embedded.
    EmbeddedKnn { model: TrainedModel, reference: FeatureMatrix },
}

impl Scorer {
    /// Compactness heads are scored by kNN among embedded training normals;
    /// every other head scores directly.
    pub fn from_model(model: TrainedModel, normals: &FeatureMatrix) -> Result<Self> {
        if model.objective == Objective::Compactness {
            let reference = model.embed_matrix(normals)?;
            Ok(Scorer::EmbeddedKnn { model, reference })
        } else {
            Ok(Scorer::Head(model))
        }
    }

    pub fn score(&self, rows: &FeatureMatrix, cfg: &PipelineConfig) -> Result<Vec<f64>> {
        match self {
            Scorer::Knn { reference } => knn_scores(rows, reference, &cfg.knn),
            Scorer::Head(model) => model.score_matrix(rows),
            Scorer::EmbeddedKnn { model, reference } => knn_scores(&model.embed_matrix(rows)?, reference, &cfg.knn),
        }
    }
}

/// Fits `method` on the given training pools.
pub fn fit(
    cfg: &PipelineConfig,
    method: Method,
    seed: u64,
    normal: &FeatureMatrix,
    near: Option<&FeatureMatrix>,
    far: Option<&FeatureMatrix>,
) -> Result<Scorer> {
    match method {
        Method::Knn => Ok(Scorer::Knn {
            reference: normal.clone(),
        }),
        Method::Head(objective) => {
            let out = train_head(cfg, objective, seed, normal, near, far)?;
            Scorer::from_model(out.model, normal)
        }
    }
}

/// Scores rows and collapses repeated coordinates (augmented views) to their mean.
pub fn score_table(scorer: &Scorer, rows: &FeatureMatrix, cfg: &PipelineConfig) -> Result<ScoreTable> {
    let scores = scorer.score(rows, cfg)?;
    let coords: Vec<_> = rows.meta().iter().map(|m| m.coord()).collect();
    ScoreTable::from_views(&coords, &scores)
}

/// Data for slide-level cross-validation. Normal rows are split into folds by
/// slide; held-out rows are never trained on and are scored in every fold. A
/// slide counts as anomalous when any of its rows is labelled anomalous.
#[derive(Clone, Debug)]
pub struct CrossvalData {
    pub normal: FeatureMatrix,
    pub held_out: FeatureMatrix,
    pub near: Option<FeatureMatrix>,
    pub far: Option<FeatureMatrix>,
    /// Diagnosis group per anomalous slide.
    pub slide_groups: BTreeMap<String, String>,
}

fn run_fold(
    cfg: &PipelineConfig,
    method: Method,
    seed: u64,
    data: &CrossvalData,
    fold: usize,
    test_slides: &BTreeSet<&str>,
) -> Result<FoldResult> {
    let train_normal = data.normal.filter(|m| !test_slides.contains(m.slide_id.as_str()));
    let test_normal = data.normal.filter(|m| test_slides.contains(m.slide_id.as_str()));
    let scorer = fit(cfg, method, seed, &train_normal, data.near.as_ref(), data.far.as_ref())?;
    let eval_rows = FeatureMatrix::concat(&[&test_normal, &data.held_out])?;
    let anomalous_slides: BTreeSet<&str> = eval_rows
        .meta()
        .iter()
        .filter(|m| m.label == Label::Anomalous)
        .map(|m| m.slide_id.as_str())
        .collect();

    let table = score_table(&scorer, &eval_rows, cfg)?;
    let mut patches = LabeledScores::default();
    let row_label: BTreeMap<_, _> = eval_rows
        .meta()
        .iter()
        .map(|m| (m.coord(), m.label == Label::Anomalous))
        .collect();
    for r in table.rows() {
        patches.push(r.score, row_label[&r.coord], None);
    }

    let mut slides = LabeledScores::default();
    for s in aggregate_table(&table, &cfg.aggregation)? {
        let group = data.slide_groups.get(&s.slide_id).cloned();
        slides.push(s.score, anomalous_slides.contains(s.slide_id.as_str()), group);
    }
    let mut result = FoldResult::evaluate(fold, &slides, &cfg.eval.sensitivity_targets)?;
    result.patch_auroc = Some(auroc(&patches)?);
    log::info!("fold {fold}: slide AUROC {:.4}", result.slide_auroc);
    Ok(result)
}

/// k-fold cross-validation over normal slides. Folds run in parallel; the
/// report is assembled in fold order, so it is identical for a given seed.
pub fn crossval(cfg: &PipelineConfig, method: Method, seed: u64, data: &CrossvalData) -> Result<EvalReport> {
    cfg.validate()?;
    if !data.held_out.meta().iter().any(|m| m.label == Label::Anomalous) {
        return Err(Error::SingleClass("cross-validation needs anomalous slides".into()));
    }
    let plan = make_folds(&data.normal.slide_ids(), cfg.eval.folds, seed)?;
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let test: BTreeSet<&str> = plan.test_slides(f).into_iter().collect();
            run_fold(cfg, method, seed, data, f, &test)
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_folds(folds)
}
