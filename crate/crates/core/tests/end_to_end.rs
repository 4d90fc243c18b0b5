use histoad::config::{Method, PipelineConfig};
use histoad::eval::{auroc, patch_labels_from_annotations, EvalReport, LabeledScores, PatchLabel};
use histoad::features::{read_features, write_features, FeatureMatrix, Label, RowMeta, TissueClass};
use histoad::models::{load_checkpoint, save_checkpoint, Objective};
use histoad::pipeline::{crossval, fit, score_table, train_head, CrossvalData, Scorer};
use histoad::raster::SlideRaster;
use histoad::scoring::{aggregate_table, HeatmapCanvas};
use histoad::synth::{gen_features, gen_raster, RasterLayout, SynthSpec};
use histoad::tiler::{detect_tissue, enumerate_patches};

fn small_spec(dim: usize, shift: f64, seed: u64) -> SynthSpec {
    let mut spec = SynthSpec::isotropic(dim, shift, 20.0, seed);
    spec.n_normal = 300;
    spec.n_anomalous = 100;
    spec.n_near_oe = 200;
    spec.n_far_oe = 200;
    spec.patches_per_slide = 10;
    spec
}

/// Raster → tissue mask → patches → toy features → scores → labels from
/// annotations, heatmap.
#[test]
fn raster_to_patch_auroc() {
    let layout = RasterLayout::strip("s", 5, 340, &[1, 3]);
    let slide = gen_raster(&layout).unwrap();
    let cfg = PipelineConfig::default();

    let mask = detect_tissue(&slide.raster, &cfg.tissue).unwrap();
    let coords = enumerate_patches(&mask, "s", &cfg.tile).unwrap();
    assert_eq!(coords.len(), 5);

    // Feature = mean green of the patch; anomaly paint has less green than tissue.
    let mut rows = FeatureMatrix::empty(1);
    for c in &coords {
        let px = slide.raster.crop(c.x, c.y, 340).unwrap();
        let green = px.chunks_exact(3).map(|p| p[1] as f64).sum::<f64>() / (340.0 * 340.0);
        let meta = RowMeta {
            slide_id: c.slide_id.clone(),
            x: c.x,
            y: c.y,
            tissue_class: TissueClass::Eval,
            label: Label::Unknown,
        };
        rows.push(&[green as f32], meta).unwrap();
    }
    let reference = rows.select(&[0, 2, 4]);
    let scorer = Scorer::Knn { reference };
    let mut knn = cfg.clone();
    knn.knn.k = 1;
    let table = score_table(&scorer, &rows, &knn).unwrap();

    let labels = patch_labels_from_annotations(&coords, &slide.annotations, 340).unwrap();
    assert_eq!(
        labels.labels,
        [
            PatchLabel::Normal,
            PatchLabel::Anomalous,
            PatchLabel::Normal,
            PatchLabel::Anomalous,
            PatchLabel::Normal
        ]
    );
    let mut patches = LabeledScores::default();
    for (r, l) in table.rows().iter().zip(&labels.labels) {
        patches.push(r.score, *l == PatchLabel::Anomalous, None);
    }
    assert_eq!(auroc(&patches).unwrap(), 1.0);

    let mut canvas = HeatmapCanvas::new(layout.width, layout.height);
    for r in table.rows() {
        canvas.accumulate(&r.coord, r.score, 340).unwrap();
    }
    let grid = canvas.grid();
    assert!(grid[340 + 170] > grid[170]);
}

#[test]
fn features_and_checkpoint_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let pools = gen_features(&small_spec(8, 6.0, 4)).unwrap();
    let path = dir.path().join("normal.hadf");
    write_features(&pools.normal, &path).unwrap();
    assert_eq!(read_features(&path).unwrap(), pools.normal);

    let mut cfg = PipelineConfig::default();
    cfg.oe_training.steps = 100;
    let out = train_head(
        &cfg,
        Objective::DeepSad,
        3,
        &pools.normal,
        Some(&pools.near_oe),
        Some(&pools.far_oe),
    )
    .unwrap();
    assert_eq!(out.loss_trace.len(), 100);
    let ckpt = dir.path().join("m.hadm");
    save_checkpoint(&out.model, &ckpt).unwrap();
    let back = load_checkpoint(&ckpt).unwrap();
    assert_eq!(back, out.model);
    assert_eq!(
        back.score_matrix(&pools.anomalous).unwrap(),
        out.model.score_matrix(&pools.anomalous).unwrap()
    );
}

#[test]
fn slide_scores_follow_the_shift() {
    let pools = gen_features(&small_spec(16, 8.0, 6)).unwrap();
    let cfg = PipelineConfig::default();
    let train = pools.normal.select(&(0..200).collect::<Vec<_>>());
    let test = pools.normal.select(&(200..300).collect::<Vec<_>>());
    let scorer = fit(&cfg, Method::Knn, 0, &train, None, None).unwrap();
    let rows = FeatureMatrix::concat(&[&test, &pools.anomalous]).unwrap();
    let table = score_table(&scorer, &rows, &cfg).unwrap();
    let mut slides = LabeledScores::default();
    for s in aggregate_table(&table, &cfg.aggregation).unwrap() {
        slides.push(s.score, s.slide_id.starts_with("anomalous"), None);
    }
    assert_eq!(slides.n_normal(), 10);
    assert_eq!(slides.n_anomalous(), 10);
    assert!(auroc(&slides).unwrap() > 0.95);
}

#[test]
fn crossval_report_round_trips_and_repeats() {
    let pools = gen_features(&small_spec(16, 6.0, 8)).unwrap();
    let data = CrossvalData {
        normal: pools.normal,
        held_out: pools.anomalous,
        near: Some(pools.near_oe),
        far: Some(pools.far_oe),
        slide_groups: pools.slide_groups,
    };
    let mut cfg = PipelineConfig::default();
    cfg.oe_training.steps = 150;
    let method = Method::Head(Objective::Hsc);
    let a = crossval(&cfg, method, 21, &data).unwrap();
    let b = crossval(&cfg, method, 21, &data).unwrap();
    let json = a.to_json().unwrap();
    assert_eq!(json, b.to_json().unwrap());
    assert_eq!(EvalReport::from_json(&json).unwrap().to_json().unwrap(), json);
    assert_eq!(a.folds.len(), 5);
    assert!(a.slide_auroc.mean > 0.5);
}

#[test]
fn blank_raster_has_no_patches() {
    let raster = SlideRaster::new("w", 680, 680, vec![250; 680 * 680 * 3]).unwrap();
    let cfg = PipelineConfig::default();
    let mask = detect_tissue(&raster, &cfg.tissue).unwrap();
    assert!(enumerate_patches(&mask, "w", &cfg.tile).unwrap().is_empty());
}
