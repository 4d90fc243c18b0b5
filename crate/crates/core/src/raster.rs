//! In-memory slide rasters and tissue masks, plus PNG/PPM I/O.

use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// An 8-bit RGB slide image, row-major, standing in for one WSI level.
#[derive(Clone, Debug, PartialEq)]
pub struct SlideRaster {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Microns per pixel; informational only.
    pub mpp: f64,
}

impl SlideRaster {
    pub fn new(id: impl Into<String>, width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "raster must be non-empty, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidInput(format!(
                "pixel buffer has {} bytes, expected {}",
                pixels.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            id: id.into(),
            width,
            height,
            pixels,
            mpp: 0.5,
        })
    }

    pub fn filled(id: impl Into<String>, width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(id, width, height, pixels)
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn fill_rect(&mut self, x: usize, y: usize, w: usize, h: usize, rgb: [u8; 3]) {
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                self.set_pixel(xx, yy, rgb);
            }
        }
    }

    /// Copies a `size`×`size` window starting at (x, y) as packed RGB.
    pub fn crop(&self, x: usize, y: usize, size: usize) -> Result<Vec<u8>> {
        if x + size > self.width || y + size > self.height {
            return Err(Error::InvalidInput(format!(
                "window ({x},{y})+{size} exceeds raster {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(size * size * 3);
        for yy in y..y + size {
            let start = (yy * self.width + x) * 3;
            out.extend_from_slice(&self.pixels[start..start + size * 3]);
        }
        Ok(out)
    }

    /// Loads a PNG or binary PPM file. The slide id is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })?;
        let rgb = img.to_rgb8();
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(id, rgb.width() as usize, rgb.height() as usize, rgb.into_raw())
    }

    /// Writes PNG or PPM depending on the file extension (`.ppm` → P6).
    pub fn save(&self, path: &Path) -> Result<()> {
        let img = RgbImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length checked at construction");
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("ppm") | Some("pnm") => ImageFormat::Pnm,
            _ => ImageFormat::Png,
        };
        img.save_with_format(path, format).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Per-pixel tissue flags (true = tissue).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TissueMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl TissueMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask has {} entries, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn tissue_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Writes an 8-bit grayscale PNG, 0 = background and 255 = tissue.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = self.bits.iter().map(|&b| if b { 255u8 } else { 0 }).collect();
        let img = GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("mask length checked at construction");
        img.save_with_format(path, ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Reads a grayscale mask; any nonzero value counts as tissue.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Self::new(w, h, img.into_raw().into_iter().map(|v| v > 0).collect())
    }
}
