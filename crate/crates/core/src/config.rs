//! Pipeline-wide configuration with the published defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::features::OeFilterConfig;
use crate::models::{Objective, TrainConfig};
use crate::scoring::{AggregationConfig, KnnConfig, TtaConfig};
use crate::stainnorm::LabStats;
use crate::tiler::{TileSpec, TissueDetectConfig, HEATMAP_OVERLAP};

/// How patches are scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// kNN distance to the training normals in raw feature space.
    Knn,
    /// A head trained with the given objective.
    Head(Objective),
}

impl Method {
    pub fn objective(self) -> Option<Objective> {
        match self {
            Method::Knn => None,
            Method::Head(o) => Some(o),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Knn => f.write_str("knn"),
            Method::Head(o) => write!(f, "{o}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "knn" {
            Ok(Method::Knn)
        } else {
            s.parse().map(Method::Head)
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tile: TileSpec,
    /// Overlap between neighbouring heatmap tiles.
    pub heatmap_overlap: usize,
    pub tissue: TissueDetectConfig,
    pub stain_target: Option<LabStats>,
    pub method: Method,
    /// Used by the outlier-exposure objectives.
    pub oe_training: TrainConfig,
    /// Used by the compactness objective.
    pub one_class_training: TrainConfig,
    pub autoencoder_training: TrainConfig,
    pub oe_filter: OeFilterConfig,
    pub knn: KnnConfig,
    pub aggregation: AggregationConfig,
    pub tta: TtaConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tile: TileSpec::default(),
            heatmap_overlap: HEATMAP_OVERLAP,
            tissue: TissueDetectConfig::default(),
            stain_target: None,
            method: Method::Head(Objective::Bce),
            oe_training: TrainConfig::outlier_exposure(Objective::Bce),
            one_class_training: TrainConfig::one_class(),
            autoencoder_training: TrainConfig::autoencoder(),
            oe_filter: OeFilterConfig::default(),
            knn: KnnConfig::default(),
            aggregation: AggregationConfig::default(),
            tta: TtaConfig::default(),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Tile spec for heatmaps: stride = patch size − overlap.
    pub fn heatmap_tile(&self) -> Result<TileSpec> {
        if self.heatmap_overlap >= self.tile.patch_size {
            return Err(Error::Config(format!(
                "heatmap overlap {} must be below the patch size {}",
                self.heatmap_overlap, self.tile.patch_size
            )));
        }
        Ok(TileSpec {
            stride: self.tile.patch_size - self.heatmap_overlap,
            ..self.tile.clone()
        })
    }

    /// Training settings for `objective`, taken from the matching section.
    pub fn training(&self, objective: Objective) -> TrainConfig {
        let base = match objective {
            Objective::Compactness => &self.one_class_training,
            Objective::Autoencoder => &self.autoencoder_training,
            _ => &self.oe_training,
        };
        TrainConfig {
            objective,
            ..base.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tile.validate()?;
        self.heatmap_tile()?;
        if let Some(t) = &self.stain_target {
            t.validate()?;
        }
        for o in Objective::ALL {
            self.training(o).validate()?;
        }
        if self.knn.k == 0 {
            return Err(Error::Config("knn k must be positive".into()));
        }
        self.aggregation.validate()?;
        if self.tta.n_views == 0 {
            return Err(Error::Config("tta n_views must be positive".into()));
        }
        if self.eval.folds < 2 {
            return Err(Error::Config("need at least 2 folds".into()));
        }
        Ok(())
    }
}
