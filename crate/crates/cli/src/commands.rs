use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;

use histoad::config::{Method, PipelineConfig};
use histoad::eval::{
    patch_labels_from_annotations, read_annotations, write_annotations, EvalReport, FoldResult, LabeledScores,
    PatchLabel,
};
use histoad::features::{
    read_features, read_manifest, write_features, write_manifest, FeatureMatrix, Label, ManifestEntry, RowMeta,
    TissueClass,
};
use histoad::models::{load_checkpoint, save_checkpoint, Objective};
use histoad::numfmt::sig9;
use histoad::pipeline::{crossval, score_table, train_head, CrossvalData, Scorer};
use histoad::raster::SlideRaster;
use histoad::scoring::{aggregate_table, write_slide_scores, Colormap, HeatmapCanvas, ScoreTable};
use histoad::stainnorm::{compute_raster_stats, compute_stats, normalize, pooled_target, LabStats};
use histoad::synth::{gen_features, gen_raster, SynthSpec};
use histoad::tiler::{detect_tissue, enumerate_patches, write_patch_csv, PatchCoord};

use crate::{Cli, Command};

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::Tile(a) => tile(cfg, a),
        Command::StainTarget(a) => stain_target(&cfg, a),
        Command::Train(a) => train_cmd(cfg, a),
        Command::Score(a) => score(cfg, a),
        Command::Aggregate(a) => aggregate(cfg, a),
        Command::Heatmap(a) => heatmap(&cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::Crossval(a) => crossval_cmd(cfg, a),
        Command::Synth(a) => synth(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

// ---------------------------------------------------------------- tile

#[derive(Args, Debug)]
pub struct TileArgs {
    /// Slide rasters (PNG or PPM).
    #[arg(required = true)]
    pub slides: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub max_background: Option<f64>,
    /// Use the overlapping heatmap stride (patch size minus overlap).
    #[arg(long)]
    pub heatmap: bool,
    /// Also write every patch as a PNG here, stain-normalized when a target is configured.
    #[arg(long)]
    pub patches_dir: Option<PathBuf>,
    /// Stain target JSON (overrides the config).
    #[arg(long)]
    pub stain_target: Option<PathBuf>,
}

fn tile(mut cfg: PipelineConfig, a: &TileArgs) -> Result<()> {
    if let Some(p) = a.patch_size {
        cfg.tile.patch_size = p;
        cfg.tile.stride = p;
    }
    if let Some(s) = a.stride {
        cfg.tile.stride = s;
    }
    if let Some(f) = a.max_background {
        cfg.tile.max_background_fraction = f;
    }
    let spec = if a.heatmap { cfg.heatmap_tile()? } else { cfg.tile.clone() };
    spec.validate()?;
    if let Some(path) = &a.stain_target {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.stain_target = Some(LabStats::from_json(&text)?);
    }
    create_dir(&a.out_dir)?;
    if let Some(d) = &a.patches_dir {
        create_dir(d)?;
    }

    let per_slide: Vec<Vec<PatchCoord>> = a
        .slides
        .par_iter()
        .map(|path| -> Result<Vec<PatchCoord>> {
            let raster = SlideRaster::load(path)?;
            let mask = detect_tissue(&raster, &cfg.tissue)?;
            mask.save_png(&a.out_dir.join(format!("{}.mask.png", raster.id)))?;
            let coords = enumerate_patches(&mask, &raster.id, &spec)?;
            if coords.is_empty() {
                log::warn!("{}: no tissue patches", path.display());
            }
            if let Some(dir) = &a.patches_dir {
                export_patches(&raster, &coords, spec.patch_size, cfg.stain_target.as_ref(), dir)?;
            }
            Ok(coords)
        })
        .collect::<Result<_>>()?;

    let coords: Vec<PatchCoord> = per_slide.into_iter().flatten().collect();
    let out = a.out_dir.join("patches.csv");
    write_patch_csv(create_file(&out)?, &coords)?;
    println!("{} patches -> {}", coords.len(), out.display());
    Ok(())
}

fn export_patches(
    raster: &SlideRaster,
    coords: &[PatchCoord],
    size: usize,
    target: Option<&LabStats>,
    dir: &Path,
) -> Result<()> {
    for c in coords {
        let mut pixels = raster.crop(c.x, c.y, size)?;
        if let Some(t) = target {
            let source = compute_stats(&pixels, None)?;
            if source.any_clamped() {
                log::warn!("{}@{},{}: flat channel, std clamped", c.slide_id, c.x, c.y);
            }
            pixels = normalize(&pixels, &source.stats, t)?;
        }
        let patch = SlideRaster::new(format!("{}_{}_{}", c.slide_id, c.x, c.y), size, size, pixels)?;
        patch.save(&dir.join(format!("{}.png", patch.id)))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- stain-target

#[derive(Args, Debug)]
pub struct StainTargetArgs {
    /// Reference slides whose tissue pixels define the target.
    #[arg(required = true)]
    pub slides: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn stain_target(cfg: &PipelineConfig, a: &StainTargetArgs) -> Result<()> {
    let stats: Vec<LabStats> = a
        .slides
        .par_iter()
        .map(|path| -> Result<LabStats> {
            let raster = SlideRaster::load(path)?;
            let mask = detect_tissue(&raster, &cfg.tissue)?;
            let est = compute_raster_stats(&raster, Some(&mask))
                .with_context(|| format!("{}: no tissue pixels", path.display()))?;
            if est.any_clamped() {
                log::warn!("{}: flat channel, std clamped", path.display());
            }
            Ok(est.stats)
        })
        .collect::<Result<_>>()?;
    let target = pooled_target(&stats)?;
    fs::write(&a.out, target.to_json()).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{}", target.to_json());
    Ok(())
}

// ---------------------------------------------------------------- manifests

/// Rows from a manifest, split by role. Manifest tags override file metadata.
#[derive(Debug)]
struct ManifestPools {
    normal: FeatureMatrix,
    near: FeatureMatrix,
    far: FeatureMatrix,
    eval: FeatureMatrix,
    groups: BTreeMap<String, String>,
}

fn load_manifest_pools(path: &Path) -> Result<ManifestPools> {
    let entries = read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))?;
    if entries.is_empty() {
        bail!("manifest {} lists no slides", path.display());
    }
    let mut files: BTreeMap<&Path, FeatureMatrix> = BTreeMap::new();
    for e in &entries {
        if !files.contains_key(e.path.as_path()) {
            files.insert(&e.path, read_features(&e.path)?);
        }
    }
    let dim = files.values().next().map(|m| m.dim()).unwrap_or(0);
    let mut pools: BTreeMap<TissueClass, FeatureMatrix> = BTreeMap::new();
    let mut groups = BTreeMap::new();
    for e in &entries {
        let m = &files[e.path.as_path()];
        if m.dim() != dim {
            bail!("{}: dimension {} differs from {}", e.path.display(), m.dim(), dim);
        }
        let pool = pools.entry(e.tissue_class).or_insert_with(|| FeatureMatrix::empty(dim));
        let mut n = 0;
        for (i, meta) in m.meta().iter().enumerate() {
            if meta.slide_id == e.slide_id {
                let meta = RowMeta {
                    tissue_class: e.tissue_class,
                    label: e.label,
                    ..meta.clone()
                };
                pool.push(m.row(i), meta)?;
                n += 1;
            }
        }
        if n == 0 {
            log::warn!("slide {} has no rows in {}", e.slide_id, e.path.display());
        }
        if let Some(g) = &e.diagnosis_group {
            groups.insert(e.slide_id.clone(), g.clone());
        }
    }
    let mut take = |c| pools.remove(&c).unwrap_or_else(|| FeatureMatrix::empty(dim));
    Ok(ManifestPools {
        normal: take(TissueClass::NormalTarget),
        near: take(TissueClass::NearOe),
        far: take(TissueClass::FarOe),
        eval: take(TissueClass::Eval),
        groups,
    })
}

fn non_empty(m: &FeatureMatrix) -> Option<&FeatureMatrix> {
    (!m.is_empty()).then_some(m)
}

fn manifest_path(flag: &Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.paths.manifest.clone())
        .context("no manifest given (use --manifest or paths.manifest in the config)")
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// bce | hsc | deepsad | compactness | autoencoder (default: config method).
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub seed: u64,
    /// Checkpoint path; the loss trace goes next to it as `<out>.loss.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

fn override_training(cfg: &mut PipelineConfig, steps: Option<usize>, lr: Option<f64>, batch: Option<usize>) {
    for tc in [
        &mut cfg.oe_training,
        &mut cfg.one_class_training,
        &mut cfg.autoencoder_training,
    ] {
        if let Some(s) = steps {
            tc.steps = s;
        }
        if let Some(l) = lr {
            tc.learning_rate = l;
        }
        if let Some(b) = batch {
            tc.batch_size = b;
        }
    }
}

fn train_cmd(mut cfg: PipelineConfig, a: &TrainArgs) -> Result<()> {
    let objective = match &a.objective {
        Some(s) => s.parse::<Objective>()?,
        None => cfg
            .method
            .objective()
            .context("configured method is knn, which needs no training; pass --objective")?,
    };
    override_training(&mut cfg, a.steps, a.learning_rate, a.batch_size);
    cfg.validate()?;
    let pools = load_manifest_pools(&manifest_path(&a.manifest, &cfg)?)?;
    if pools.normal.is_empty() {
        bail!("manifest has no normal_target slides");
    }
    if !objective.uses_outlier_exposure() && (!pools.near.is_empty() || !pools.far.is_empty()) {
        log::info!("{objective} ignores the outlier pools");
    }
    let out = train_head(
        &cfg,
        objective,
        a.seed,
        &pools.normal,
        non_empty(&pools.near),
        non_empty(&pools.far),
    )?;
    save_checkpoint(&out.model, &a.out)?;
    let trace_path = PathBuf::from(format!("{}.loss.csv", a.out.display()));
    let mut w = create_file(&trace_path)?;
    writeln!(w, "step,loss")?;
    for (i, l) in out.loss_trace.iter().enumerate() {
        writeln!(w, "{i},{}", sig9(*l))?;
    }
    w.flush()?;
    match out.loss_trace.last() {
        Some(l) => println!("trained {objective}: final loss {}", sig9(*l)),
        None => println!("trained {objective}: no steps"),
    }
    Ok(())
}

// ---------------------------------------------------------------- score

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Feature files to score. Rows sharing a coordinate are augmented views and are averaged.
    #[arg(required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Normal reference features for kNN scoring.
    #[arg(long)]
    pub reference: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
}

fn read_all(paths: &[PathBuf]) -> Result<FeatureMatrix> {
    let parts = paths.iter().map(|p| read_features(p)).collect::<histoad::Result<Vec<_>>>()?;
    let refs: Vec<&FeatureMatrix> = parts.iter().collect();
    Ok(FeatureMatrix::concat(&refs)?)
}

fn score(mut cfg: PipelineConfig, a: &ScoreArgs) -> Result<()> {
    if let Some(k) = a.k {
        cfg.knn.k = k;
    }
    cfg.validate()?;
    let rows = read_all(&a.features)?;
    let reference = if a.reference.is_empty() {
        None
    } else {
        Some(read_all(&a.reference)?)
    };
    let scorer = match (&a.checkpoint, reference) {
        (Some(ckpt), reference) => {
            let model = load_checkpoint(ckpt)?;
            match (model.objective, reference) {
                (Objective::Compactness, Some(r)) => Scorer::from_model(model, &r)?,
                (Objective::Compactness, None) => {
                    log::warn!("no --reference for a compactness head; scoring by center distance");
                    Scorer::Head(model)
                }
                (_, _) => Scorer::Head(model),
            }
        }
        (None, Some(r)) => Scorer::Knn { reference: r },
        (None, None) => bail!("need --checkpoint or --reference"),
    };
    let table = score_table(&scorer, &rows, &cfg)?;
    if rows.len() != table.len() * cfg.tta.n_views && rows.len() != table.len() {
        log::info!("{} rows averaged into {} patches", rows.len(), table.len());
    }
    table.save_csv(&a.out)?;
    println!("{} patch scores -> {}", table.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- aggregate

#[derive(Args, Debug)]
pub struct AggregateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub top_fraction: Option<f64>,
}

fn aggregate(mut cfg: PipelineConfig, a: &AggregateArgs) -> Result<()> {
    if let Some(f) = a.top_fraction {
        cfg.aggregation.top_fraction = f;
    }
    cfg.aggregation.validate()?;
    let table = ScoreTable::load_csv(&a.scores)?;
    let slides = aggregate_table(&table, &cfg.aggregation)?;
    write_slide_scores(create_file(&a.out)?, &slides)?;
    println!("{} slide scores -> {}", slides.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- heatmap

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Slide to render; may be omitted when the table holds a single slide.
    #[arg(long)]
    pub slide_id: Option<String>,
    /// Slide raster, used only for its dimensions.
    #[arg(long, conflicts_with_all = ["width", "height"])]
    pub slide: Option<PathBuf>,
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the averaged grid as a one-column feature file.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// blue_red | heat
    #[arg(long, default_value = "blue_red")]
    pub colormap: String,
    /// Score mapped to the low end of the colormap (default: 0, or the minimum if scores leave [0,1]).
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
}

fn heatmap(cfg: &PipelineConfig, a: &HeatmapArgs) -> Result<()> {
    let colormap = Colormap::by_name(&a.colormap)?;
    let table = ScoreTable::load_csv(&a.scores)?;
    let by_slide = table.by_slide();
    let slide_id = match &a.slide_id {
        Some(s) => s.clone(),
        None if by_slide.len() == 1 => by_slide.keys().next().unwrap().to_string(),
        None => bail!("score table holds {} slides; pass --slide-id", by_slide.len()),
    };
    let rows = by_slide
        .get(slide_id.as_str())
        .with_context(|| format!("slide {slide_id} not in {}", a.scores.display()))?;
    let (width, height) = match (&a.slide, a.width, a.height) {
        (Some(p), _, _) => {
            let r = SlideRaster::load(p)?;
            (r.width, r.height)
        }
        (None, Some(w), Some(h)) => (w, h),
        _ => bail!("need --slide or --width/--height"),
    };
    let size = cfg.tile.patch_size;

    let mut raw = HeatmapCanvas::new(width, height);
    for r in rows {
        raw.accumulate(&r.coord, r.score, size)?;
    }
    if let Some(p) = &a.raw {
        write_features(&raw.to_feature_matrix(&slide_id), p)?;
    }

    let (lo, hi) = color_range(rows.iter().map(|r| r.score), a.vmin, a.vmax);
    let mut shown = HeatmapCanvas::new(width, height);
    for r in rows {
        let v = if hi > lo { (r.score - lo) / (hi - lo) } else { 0.5 };
        shown.accumulate(&r.coord, v, size)?;
    }
    shown.save_png(&colormap, &a.out)?;
    println!("heatmap {}x{} for {slide_id} -> {}", width, height, a.out.display());
    Ok(())
}

fn color_range(scores: impl Iterator<Item = f64> + Clone, vmin: Option<f64>, vmax: Option<f64>) -> (f64, f64) {
    let min = scores.clone().fold(f64::INFINITY, f64::min);
    let max = scores.fold(f64::NEG_INFINITY, f64::max);
    let unit = min >= 0.0 && max <= 1.0;
    let lo = vmin.unwrap_or(if unit { 0.0 } else { min });
    let hi = vmax.unwrap_or(if unit { 1.0 } else { max });
    (lo, hi)
}

// ---------------------------------------------------------------- eval

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Slide scores CSV (`slide_id,score`).
    #[arg(long)]
    pub slide_scores: PathBuf,
    /// Manifest with slide labels and diagnosis groups.
    #[arg(long)]
    pub labels: PathBuf,
    /// Patch scores CSV for patch-level AUROC.
    #[arg(long, requires = "annotations_dir")]
    pub patch_scores: Option<PathBuf>,
    /// Directory of `<slide_id>.annotations.json` files.
    #[arg(long)]
    pub annotations_dir: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn slide_labels(entries: &[ManifestEntry]) -> BTreeMap<&str, (&ManifestEntry, bool)> {
    entries
        .iter()
        .filter_map(|e| match e.label {
            Label::Normal => Some((e.slide_id.as_str(), (e, false))),
            Label::Anomalous => Some((e.slide_id.as_str(), (e, true))),
            Label::Unknown => None,
        })
        .collect()
}

fn eval(cfg: &PipelineConfig, a: &EvalArgs) -> Result<()> {
    let entries = read_manifest(&a.labels)?;
    let labels = slide_labels(&entries);
    let mut slides = LabeledScores::default();
    for s in histoad::scoring::read_slide_scores(&a.slide_scores)? {
        match labels.get(s.slide_id.as_str()) {
            Some((e, anomalous)) => slides.push(s.score, *anomalous, e.diagnosis_group.clone()),
            None => log::warn!("slide {} has no label; skipped", s.slide_id),
        }
    }
    let mut fold = FoldResult::evaluate(0, &slides, &cfg.eval.sensitivity_targets)?;
    if let (Some(p), Some(dir)) = (&a.patch_scores, &a.annotations_dir) {
        let patches = patch_level(cfg, p, dir, &labels)?;
        fold.patch_auroc = Some(histoad::eval::auroc(&patches)?);
    }
    let report = EvalReport::from_folds(vec![fold])?;
    if let Some(out) = &a.out {
        fs::write(out, report.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn patch_level(
    cfg: &PipelineConfig,
    scores: &Path,
    dir: &Path,
    labels: &BTreeMap<&str, (&ManifestEntry, bool)>,
) -> Result<LabeledScores> {
    let table = ScoreTable::load_csv(scores)?;
    let mut out = LabeledScores::default();
    for (slide, rows) in table.by_slide() {
        let ann_path = dir.join(format!("{slide}.annotations.json"));
        let coords: Vec<PatchCoord> = rows.iter().map(|r| r.coord.clone()).collect();
        let patch_labels = if ann_path.exists() {
            patch_labels_from_annotations(&coords, &read_annotations(&ann_path)?, cfg.tile.patch_size)?.labels
        } else {
            match labels.get(slide) {
                Some((_, false)) => vec![PatchLabel::Normal; coords.len()],
                _ => {
                    log::warn!("slide {slide}: no annotations; left out of patch AUROC");
                    continue;
                }
            }
        };
        for (r, l) in rows.iter().zip(patch_labels) {
            match l {
                PatchLabel::Normal => out.push(r.score, false, None),
                PatchLabel::Anomalous => out.push(r.score, true, None),
                PatchLabel::Excluded => {}
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- crossval

#[derive(Args, Debug)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// knn | bce | hsc | deepsad | compactness | autoencoder (default: config method).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn crossval_cmd(mut cfg: PipelineConfig, a: &CrossvalArgs) -> Result<()> {
    let method = match &a.method {
        Some(m) => m.parse::<Method>()?,
        None => cfg.method,
    };
    if let Some(k) = a.folds {
        cfg.eval.folds = k;
    }
    override_training(&mut cfg, a.steps, None, None);
    let pools = load_manifest_pools(&manifest_path(&a.manifest, &cfg)?)?;
    let anomalous = pools.eval.filter(|m| m.label == Label::Anomalous);
    let extra_normal = pools.eval.filter(|m| m.label == Label::Normal);
    if !extra_normal.is_empty() {
        log::info!("{} held-out normal eval rows join every test fold", extra_normal.len());
    }
    let data = CrossvalData {
        normal: pools.normal,
        held_out: FeatureMatrix::concat(&[&anomalous, &extra_normal])?,
        near: non_empty(&pools.near).cloned(),
        far: non_empty(&pools.far).cloned(),
        slide_groups: pools.groups,
    };
    let report = crossval(&cfg, method, a.seed, &data)?;
    if let Some(out) = &a.out {
        fs::write(out, report.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{}", report.render_table());
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Synthetic data spec (JSON). Without it a 16-d default is used.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_spec")]
    pub out_dir: Option<PathBuf>,
    /// Print the default spec and exit.
    #[arg(long)]
    pub print_spec: bool,
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SynthSpec::from_json(&text)?
        }
        None => SynthSpec::isotropic(16, 4.0, 20.0, 0),
    };
    if a.print_spec {
        println!("{}", spec.to_json()?);
        return Ok(());
    }
    let dir = a.out_dir.as_ref().context("--out-dir is required")?;
    create_dir(dir)?;
    let pools = gen_features(&spec)?;
    let mut manifest = Vec::new();
    for (name, m) in [
        ("normal", &pools.normal),
        ("anomalous", &pools.anomalous),
        ("near_oe", &pools.near_oe),
        ("far_oe", &pools.far_oe),
    ] {
        let file = format!("{name}.hadf");
        write_features(m, &dir.join(&file))?;
        let mut seen = BTreeMap::new();
        for meta in m.meta() {
            seen.entry(meta.slide_id.clone()).or_insert((meta.tissue_class, meta.label));
        }
        for (slide_id, (tissue_class, label)) in seen {
            manifest.push(ManifestEntry {
                diagnosis_group: pools.slide_groups.get(&slide_id).cloned(),
                slide_id,
                path: PathBuf::from(&file),
                tissue_class,
                label,
            });
        }
    }
    write_manifest(&dir.join("manifest.csv"), &manifest)?;
    for layout in &spec.rasters {
        let slide = gen_raster(layout)?;
        slide.raster.save(&dir.join(format!("{}.png", layout.slide_id)))?;
        slide.mask.save_png(&dir.join(format!("{}.mask.png", layout.slide_id)))?;
        write_annotations(&dir.join(format!("{}.annotations.json", layout.slide_id)), &slide.annotations)?;
    }
    fs::write(dir.join("spec.json"), spec.to_json()?)?;
    println!(
        "synthetic data -> {} ({} slides, {} rasters)",
        dir.display(),
        manifest.len(),
        spec.rasters.len()
    );
    Ok(())
}
