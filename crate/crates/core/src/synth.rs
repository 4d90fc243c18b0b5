//! Synthetic feature pools and toy slides with known ground truth.
//!
//! Feature pools are diagonal Gaussians drawn with Box–Muller, each pool on
//! its own stream of the spec seed:
//!
//! | pool      | distribution        | stream                     |
//! |-----------|---------------------|----------------------------|
//! | normal    | N(μ, σ²)            | `streams::SYNTH_NORMAL`    |
//! | anomalous | N(μ + δ, σ²)        | `streams::SYNTH_ANOMALOUS` |
//! | near OE   | N(μ + δ/2, σ²)      | `streams::SYNTH_NEAR`      |
//! | far OE    | N(μ_far, σ²)        | `streams::SYNTH_FAR`       |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Annotation, AnnotationKind};
use crate::features::{FeatureMatrix, Label, RowMeta, TissueClass};
use crate::raster::{SlideRaster, TissueMask};
use crate::rng::{streams, Rng};
use crate::tiler::DEFAULT_PATCH_SIZE;

pub const BACKGROUND_RGB: [u8; 3] = [255, 255, 255];
pub const TISSUE_RGB: [u8; 3] = [200, 80, 120];
pub const ANOMALY_RGB: [u8; 3] = [120, 60, 160];
pub const ARTIFACT_RGB: [u8; 3] = [40, 200, 60];

/// Patches of one synthetic slide are laid out on a grid this many tiles wide.
const GRID_COLUMNS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub dim: usize,
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub n_near_oe: usize,
    pub n_far_oe: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub shift: Vec<f64>,
    pub far_mean: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_patches_per_slide")]
    pub patches_per_slide: usize,
    /// Anomalous slides cycle through these diagnosis groups.
    #[serde(default)]
    pub diagnosis_groups: Vec<String>,
    #[serde(default)]
    pub rasters: Vec<RasterLayout>,
}

fn default_patches_per_slide() -> usize {
    20
}

impl SynthSpec {
    /// Unit-variance pools centred at the origin with ‖δ‖ = `shift_norm`
    /// spread evenly over all coordinates. The far-OE mean sits at distance
    /// `far_distance` along the alternating-sign direction, which is
    /// orthogonal to δ when `dim` is even.
    pub fn isotropic(dim: usize, shift_norm: f64, far_distance: f64, seed: u64) -> Self {
        let per = shift_norm / (dim as f64).sqrt();
        let far = far_distance / (dim as f64).sqrt();
        Self {
            dim,
            n_normal: 2000,
            n_anomalous: 200,
            n_near_oe: 1000,
            n_far_oe: 1000,
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            shift: vec![per; dim],
            far_mean: (0..dim).map(|i| if i % 2 == 0 { far } else { -far }).collect(),
            seed,
            patches_per_slide: default_patches_per_slide(),
            diagnosis_groups: Vec::new(),
            rasters: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("synth dim must be positive".into()));
        }
        for (name, v) in [
            ("mean", &self.mean),
            ("std", &self.std),
            ("shift", &self.shift),
            ("far_mean", &self.far_mean),
        ] {
            if v.len() != self.dim {
                return Err(Error::Config(format!("{name} has length {}, expected {}", v.len(), self.dim)));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} contains non-finite values")));
            }
        }
        if self.std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("synth std must be positive".into()));
        }
        for (name, n) in [
            ("n_normal", self.n_normal),
            ("n_anomalous", self.n_anomalous),
            ("n_near_oe", self.n_near_oe),
            ("n_far_oe", self.n_far_oe),
            ("patches_per_slide", self.patches_per_slide),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPools {
    pub normal: FeatureMatrix,
    pub anomalous: FeatureMatrix,
    pub near_oe: FeatureMatrix,
    pub far_oe: FeatureMatrix,
    /// Diagnosis group of each anomalous slide, when groups were requested.
    pub slide_groups: BTreeMap<String, String>,
}

struct PoolPlan<'a> {
    n: usize,
    offset: Vec<f64>,
    stream: u64,
    prefix: &'a str,
    class: TissueClass,
    label: Label,
}

fn gen_pool(spec: &SynthSpec, plan: PoolPlan<'_>) -> Result<FeatureMatrix> {
    let mut rng = Rng::with_stream(spec.seed, plan.stream);
    let mut data = Vec::with_capacity(plan.n * spec.dim);
    let mut meta = Vec::with_capacity(plan.n);
    for i in 0..plan.n {
        for d in 0..spec.dim {
            let v = plan.offset[d] + spec.std[d] * rng.normal();
            data.push(v as f32);
        }
        let slot = i % spec.patches_per_slide;
        meta.push(RowMeta {
            slide_id: format!("{}{:04}", plan.prefix, i / spec.patches_per_slide),
            x: (slot % GRID_COLUMNS) * DEFAULT_PATCH_SIZE,
            y: (slot / GRID_COLUMNS) * DEFAULT_PATCH_SIZE,
            tissue_class: plan.class,
            label: plan.label,
        });
    }
    FeatureMatrix::new(spec.dim, data, meta)
}

/// Draws the four pools. Rows are grouped into slides of
/// `patches_per_slide` consecutive rows.
pub fn gen_features(spec: &SynthSpec) -> Result<SynthPools> {
    spec.validate()?;
    let shifted = |scale: f64| -> Vec<f64> {
        spec.mean.iter().zip(&spec.shift).map(|(m, d)| m + scale * d).collect()
    };
    let normal = gen_pool(
        spec,
        PoolPlan {
            n: spec.n_normal,
            offset: spec.mean.clone(),
            stream: streams::SYNTH_NORMAL,
            prefix: "normal_",
            class: TissueClass::NormalTarget,
            label: Label::Normal,
        },
    )?;
    let anomalous = gen_pool(
        spec,
        PoolPlan {
            n: spec.n_anomalous,
            offset: shifted(1.0),
            stream: streams::SYNTH_ANOMALOUS,
            prefix: "anomalous_",
            class: TissueClass::Eval,
            label: Label::Anomalous,
        },
    )?;
    let near_oe = gen_pool(
        spec,
        PoolPlan {
            n: spec.n_near_oe,
            offset: shifted(0.5),
            stream: streams::SYNTH_NEAR,
            prefix: "near_",
            class: TissueClass::NearOe,
            label: Label::Unknown,
        },
    )?;
    let far_oe = gen_pool(
        spec,
        PoolPlan {
            n: spec.n_far_oe,
            offset: spec.far_mean.clone(),
            stream: streams::SYNTH_FAR,
            prefix: "far_",
            class: TissueClass::FarOe,
            label: Label::Unknown,
        },
    )?;
    let mut slide_groups = BTreeMap::new();
    if !spec.diagnosis_groups.is_empty() {
        for (i, id) in anomalous.slide_ids().into_iter().enumerate() {
            slide_groups.insert(id, spec.diagnosis_groups[i % spec.diagnosis_groups.len()].clone());
        }
    }
    Ok(SynthPools {
        normal,
        anomalous,
        near_oe,
        far_oe,
        slide_groups,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Tissue,
    /// Painted in the anomaly colour and annotated as diagnosis-defining.
    Anomaly,
    /// Tissue-coloured, annotated as other anomalous.
    OtherAnomalous,
    Artifact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn new(kind: RegionKind, x: usize, y: usize, width: usize, height: usize) -> Self {
        Self {
            kind,
            x,
            y,
            width,
            height,
        }
    }

    fn overlaps(&self, o: &Region) -> bool {
        self.x < o.x + o.width && o.x < self.x + self.width && self.y < o.y + o.height && o.y < self.y + self.height
    }

    fn annotation_kind(&self) -> Option<AnnotationKind> {
        match self.kind {
            RegionKind::Tissue => None,
            RegionKind::Anomaly => Some(AnnotationKind::DiagnosisDefining),
            RegionKind::OtherAnomalous => Some(AnnotationKind::OtherAnomalous),
            RegionKind::Artifact => Some(AnnotationKind::Artifact),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterLayout {
    pub slide_id: String,
    pub width: usize,
    pub height: usize,
    pub regions: Vec<Region>,
}

impl RasterLayout {
    /// A one-tile-high strip of `tiles` tissue patches; the listed tiles are
    /// covered by anomaly rectangles.
    pub fn strip(slide_id: &str, tiles: usize, patch_size: usize, anomalous_tiles: &[usize]) -> Self {
        let mut regions = vec![Region::new(RegionKind::Tissue, 0, 0, tiles * patch_size, patch_size)];
        for &t in anomalous_tiles {
            regions.push(Region::new(RegionKind::Anomaly, t * patch_size, 0, patch_size, patch_size));
        }
        Self {
            slide_id: slide_id.to_string(),
            width: tiles * patch_size,
            height: patch_size,
            regions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("raster layout must have positive size".into()));
        }
        for r in &self.regions {
            if r.width == 0 || r.height == 0 {
                return Err(Error::Config(format!("empty region {r:?}")));
            }
            if r.x + r.width > self.width || r.y + r.height > self.height {
                return Err(Error::Config(format!("region {r:?} exceeds the canvas")));
            }
        }
        let annotated: Vec<&Region> = self.regions.iter().filter(|r| r.kind != RegionKind::Tissue).collect();
        for (i, a) in annotated.iter().enumerate() {
            for b in &annotated[i + 1..] {
                if a.kind != b.kind && a.overlaps(b) {
                    return Err(Error::Config(format!("contradictory overlapping regions {a:?} and {b:?}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSlide {
    pub raster: SlideRaster,
    /// Ground-truth tissue: the union of all painted regions.
    pub mask: TissueMask,
    pub annotations: Vec<Annotation>,
}

/// Paints tissue first, then annotated regions on top.
pub fn gen_raster(layout: &RasterLayout) -> Result<SynthSlide> {
    layout.validate()?;
    let mut raster = SlideRaster::filled(layout.slide_id.clone(), layout.width, layout.height, BACKGROUND_RGB)?;
    let mut mask = TissueMask::filled(layout.width, layout.height, false);
    let paint_order = [
        RegionKind::Tissue,
        RegionKind::OtherAnomalous,
        RegionKind::Anomaly,
        RegionKind::Artifact,
    ];
    for kind in paint_order {
        for r in layout.regions.iter().filter(|r| r.kind == kind) {
            let rgb = match kind {
                RegionKind::Tissue | RegionKind::OtherAnomalous => TISSUE_RGB,
                RegionKind::Anomaly => ANOMALY_RGB,
                RegionKind::Artifact => ARTIFACT_RGB,
            };
            raster.fill_rect(r.x, r.y, r.width, r.height, rgb);
            for y in r.y..r.y + r.height {
                for x in r.x..r.x + r.width {
                    mask.set(x, y, true);
                }
            }
        }
    }
    let annotations = layout
        .regions
        .iter()
        .filter_map(|r| {
            r.annotation_kind().map(|kind| {
                Annotation::rect(kind, r.x as f64, r.y as f64, r.width as f64, r.height as f64)
            })
        })
        .collect();
    Ok(SynthSlide {
        raster,
        mask,
        annotations,
    })
}
