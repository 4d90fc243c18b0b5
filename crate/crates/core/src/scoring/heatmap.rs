//! Overlap-averaged patch score maps and their color rendering.

use std::path::Path;

use image::{ImageFormat, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Label, RowMeta, TissueClass};
use crate::tiler::PatchCoord;

/// Per-pixel running sums of patch scores and covering-patch counts.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapCanvas {
    pub width: usize,
    pub height: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl HeatmapCanvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            sum: vec![0.0; width * height],
            count: vec![0; width * height],
        }
    }

    /// Adds `score` to every pixel of the `patch_size`² window at `coord`.
    pub fn accumulate(&mut self, coord: &PatchCoord, score: f64, patch_size: usize) -> Result<()> {
        if coord.x + patch_size > self.width || coord.y + patch_size > self.height {
            return Err(Error::InvalidInput(format!(
                "patch ({},{})+{patch_size} outside {}x{} canvas",
                coord.x, coord.y, self.width, self.height
            )));
        }
        if !score.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score at {coord:?}")));
        }
        for y in coord.y..coord.y + patch_size {
            let row = y * self.width;
            for x in coord.x..coord.x + patch_size {
                self.sum[row + x] += score;
                self.count[row + x] += 1;
            }
        }
        Ok(())
    }

    /// Folds another canvas (e.g. a per-worker partial) into this one.
    pub fn merge(&mut self, other: &HeatmapCanvas) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::InvalidInput("canvas sizes differ".into()));
        }
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.count[i] += other.count[i];
        }
        Ok(())
    }

    pub fn count(&self, x: usize, y: usize) -> u32 {
        self.count[y * self.width + x]
    }

    /// Averaged score, or `None` where no patch covers the pixel.
    pub fn value(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        (self.count[i] > 0).then(|| self.sum[i] / self.count[i] as f64)
    }

    /// Row-major averaged grid; uncovered pixels are NaN.
    pub fn grid(&self) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect()
    }

    /// Colors covered pixels through `colormap` (opaque); uncovered pixels
    /// are fully transparent.
    pub fn render(&self, colormap: &Colormap) -> RgbaImage {
        let mut img = RgbaImage::new(self.width as u32, self.height as u32);
        for y in 0..self.height {
            for x in 0..self.width {
                let px = match self.value(x, y) {
                    Some(v) => {
                        let [r, g, b] = colormap.map(v);
                        [r, g, b, 255]
                    }
                    None => [0, 0, 0, 0],
                };
                img.put_pixel(x as u32, y as u32, image::Rgba(px));
            }
        }
        img
    }

    pub fn save_png(&self, colormap: &Colormap, path: &Path) -> Result<()> {
        self.render(colormap)
            .save_with_format(path, ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// The averaged grid as a one-column feature matrix, one row per pixel
    /// in row-major order.
    pub fn to_feature_matrix(&self, slide_id: &str) -> FeatureMatrix {
        let data: Vec<f32> = self.grid().into_iter().map(|v| v as f32).collect();
        let meta = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| RowMeta {
                slide_id: slide_id.to_string(),
                x,
                y,
                tissue_class: TissueClass::Eval,
                label: Label::Unknown,
            })
            .collect();
        FeatureMatrix::new(1, data, meta).expect("one value per pixel")
    }
}

/// Piecewise-linear colormap over [0, 1]; inputs outside are clamped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Colormap {
    /// (position, color) stops with strictly increasing positions from 0 to 1.
    pub stops: Vec<(f64, [u8; 3])>,
}

impl Colormap {
    /// Blue (0) to red (1).
    pub fn blue_red() -> Self {
        Self {
            stops: vec![(0.0, [0, 0, 255]), (1.0, [255, 0, 0])],
        }
    }

    /// Black → red → yellow → white.
    pub fn heat() -> Self {
        Self {
            stops: vec![
                (0.0, [0, 0, 0]),
                (1.0 / 3.0, [255, 0, 0]),
                (2.0 / 3.0, [255, 255, 0]),
                (1.0, [255, 255, 255]),
            ],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "blue_red" | "bluered" => Ok(Self::blue_red()),
            "heat" => Ok(Self::heat()),
            other => Err(Error::Config(format!("unknown colormap {other:?}"))),
        }
    }

    pub fn map(&self, value: f64) -> [u8; 3] {
        let v = value.clamp(0.0, 1.0);
        let hi = self
            .stops
            .iter()
            .position(|(p, _)| *p >= v)
            .unwrap_or(self.stops.len() - 1)
            .max(1);
        let (p0, c0) = self.stops[hi - 1];
        let (p1, c1) = self.stops[hi];
        let t = if p1 > p0 { (v - p0) / (p1 - p0) } else { 0.0 };
        [0, 1, 2].map(|i| (c0[i] as f64 + t * (c1[i] as f64 - c0[i] as f64)).round() as u8)
    }
}
