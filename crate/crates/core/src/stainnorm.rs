//! Reinhard color transfer in the lαβ opponent space.
//!
//! Pixels go RGB → LMS (linear cone response) → log10 → lαβ (decorrelated
//! opponent axes). In lαβ each channel is shifted and scaled independently
//! so its mean/std match a target, then mapped back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::ser_sig9_array;
use crate::raster::{SlideRaster, TissueMask};

/// Floor applied before taking log10 of LMS responses.
pub const LMS_LOG_FLOOR: f64 = 1e-6;
/// Lower bound for a channel standard deviation.
pub const STD_EPSILON: f64 = 1e-6;

pub const RGB_TO_LMS: [[f64; 3]; 3] = [
    [0.3811, 0.5783, 0.0402],
    [0.1967, 0.7244, 0.0782],
    [0.0241, 0.1288, 0.8444],
];

/// Exact inverse of [`RGB_TO_LMS`].
pub const LMS_TO_RGB: [[f64; 3]; 3] = [
    [4.468669863496255, -3.5886759034721267, 0.11960436657860116],
    [-1.2197166276177631, 2.3830879129554567, -0.16263011175140055],
    [0.05850847693854586, -0.2610784390276937, 1.205665908525623],
];

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;
const INV_SQRT6: f64 = 0.408_248_290_463_863;
const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// log-LMS → lαβ: diag(1/√3, 1/√6, 1/√2) · [[1,1,1],[1,1,−2],[1,−1,0]].
pub const LOGLMS_TO_LAB: [[f64; 3]; 3] = [
    [INV_SQRT3, INV_SQRT3, INV_SQRT3],
    [INV_SQRT6, INV_SQRT6, -2.0 * INV_SQRT6],
    [INV_SQRT2, -INV_SQRT2, 0.0],
];

/// lαβ → log-LMS, the transpose of the orthonormal forward map.
pub const LAB_TO_LOGLMS: [[f64; 3]; 3] = [
    [INV_SQRT3, INV_SQRT6, INV_SQRT2],
    [INV_SQRT3, INV_SQRT6, -INV_SQRT2],
    [INV_SQRT3, -2.0 * INV_SQRT6, 0.0],
];

#[inline]
fn mat3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// RGB on the 0..255 scale to lαβ.
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lms = mat3(&RGB_TO_LMS, [rgb[0] as f64, rgb[1] as f64, rgb[2] as f64]);
    let log = lms.map(|c| c.max(LMS_LOG_FLOOR).log10());
    mat3(&LOGLMS_TO_LAB, log)
}

/// lαβ to unclamped, unrounded RGB on the 0..255 scale.
pub fn lab_to_rgb_f64(lab: [f64; 3]) -> [f64; 3] {
    let log = mat3(&LAB_TO_LOGLMS, lab);
    mat3(&LMS_TO_RGB, log.map(|c| 10f64.powf(c)))
}

pub fn lab_to_rgb(lab: [f64; 3]) -> [u8; 3] {
    lab_to_rgb_f64(lab).map(|c| c.round().clamp(0.0, 255.0) as u8)
}

/// Per-channel lαβ statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabStats {
    #[serde(serialize_with = "ser_sig9_array")]
    pub mean: [f64; 3],
    #[serde(serialize_with = "ser_sig9_array")]
    pub std: [f64; 3],
}

impl LabStats {
    pub fn validate(&self) -> Result<()> {
        if self.std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid lab stats {self:?}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain numeric struct")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stats: Self = serde_json::from_str(s)?;
        stats.validate()?;
        Ok(stats)
    }
}

/// Statistics plus a flag per channel recording whether the std was clamped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsEstimate {
    pub stats: LabStats,
    pub clamped: [bool; 3],
}

impl StatsEstimate {
    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }
}

/// Mean and population std of lαβ values.
pub fn stats_of_lab(values: &[[f64; 3]]) -> Result<StatsEstimate> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 pixels for color statistics, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mut mean = [0.0; 3];
    for v in values {
        for c in 0..3 {
            mean[c] += v[c];
        }
    }
    mean = mean.map(|m| m / n);
    let mut var = [0.0; 3];
    for v in values {
        for c in 0..3 {
            var[c] += (v[c] - mean[c]).powi(2);
        }
    }
    let mut std = [0.0; 3];
    let mut clamped = [false; 3];
    for c in 0..3 {
        let s = (var[c] / n).sqrt();
        if s < STD_EPSILON {
            std[c] = STD_EPSILON;
            clamped[c] = true;
        } else {
            std[c] = s;
        }
    }
    Ok(StatsEstimate {
        stats: LabStats { mean, std },
        clamped,
    })
}

/// Statistics over packed RGB pixels, optionally restricted to `mask`.
pub fn compute_stats(pixels: &[u8], mask: Option<&[bool]>) -> Result<StatsEstimate> {
    if !pixels.len().is_multiple_of(3) {
        return Err(Error::InvalidInput("pixel buffer not a multiple of 3".into()));
    }
    if let Some(m) = mask {
        if m.len() * 3 != pixels.len() {
            return Err(Error::DimMismatch {
                expected: pixels.len() / 3,
                actual: m.len(),
            });
        }
    }
    let lab: Vec<[f64; 3]> = pixels
        .chunks_exact(3)
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, p)| rgb_to_lab([p[0], p[1], p[2]]))
        .collect();
    let est = stats_of_lab(&lab)?;
    if est.any_clamped() {
        log::warn!("near-constant color channel, std clamped to {STD_EPSILON}");
    }
    Ok(est)
}

pub fn compute_raster_stats(raster: &SlideRaster, mask: Option<&TissueMask>) -> Result<StatsEstimate> {
    if let Some(m) = mask {
        if m.width != raster.width || m.height != raster.height {
            return Err(Error::InvalidInput("mask and raster dimensions differ".into()));
        }
    }
    compute_stats(&raster.pixels, mask.map(|m| m.bits.as_slice()))
}

/// Applies the per-channel transfer in lαβ without leaving the color space.
pub fn normalize_lab(values: &[[f64; 3]], source: &LabStats, target: &LabStats) -> Vec<[f64; 3]> {
    let scale = [0, 1, 2].map(|c| target.std[c] / source.std[c]);
    values
        .iter()
        .map(|v| [0, 1, 2].map(|c| (v[c] - source.mean[c]) * scale[c] + target.mean[c]))
        .collect()
}

/// Maps packed RGB pixels from `source` statistics to `target` statistics.
/// Results are rounded and clamped to 0..=255.
pub fn normalize(pixels: &[u8], source: &LabStats, target: &LabStats) -> Result<Vec<u8>> {
    source.validate()?;
    target.validate()?;
    let lab: Vec<[f64; 3]> = pixels
        .chunks_exact(3)
        .map(|p| rgb_to_lab([p[0], p[1], p[2]]))
        .collect();
    Ok(normalize_lab(&lab, source, target)
        .into_iter()
        .flat_map(lab_to_rgb)
        .collect())
}

/// Normalizes one patch using its own statistics as the source.
pub fn normalize_patch(pixels: &[u8], target: &LabStats) -> Result<Vec<u8>> {
    let source = compute_stats(pixels, None)?.stats;
    normalize(pixels, &source, target)
}

/// Pooled target: the mean of per-slide means and of per-slide stds.
pub fn pooled_target(per_slide: &[LabStats]) -> Result<LabStats> {
    if per_slide.is_empty() {
        return Err(Error::Empty("no slide statistics to pool".into()));
    }
    let n = per_slide.len() as f64;
    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    for s in per_slide {
        for c in 0..3 {
            mean[c] += s.mean[c] / n;
            std[c] += s.std[c] / n;
        }
    }
    Ok(LabStats { mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_patch(rng: &mut Rng, n: usize) -> Vec<u8> {
        (0..n * 3).map(|_| rng.below(256) as u8).collect()
    }

    #[test]
    fn inverse_matrices() {
        for (a, b) in [(&RGB_TO_LMS, &LMS_TO_RGB), (&LOGLMS_TO_LAB, &LAB_TO_LOGLMS)] {
            for i in 0..3 {
                for j in 0..3 {
                    let v: f64 = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-12, "{i}{j} {v}");
                }
            }
        }
    }

    #[test]
    fn rgb_roundtrip_within_one_level() {
        for r in (0..=255).step_by(5) {
            for g in (0..=255).step_by(5) {
                for b in (0..=255).step_by(15) {
                    let px = [r as u8, g as u8, b as u8];
                    let back = lab_to_rgb(rgb_to_lab(px));
                    for c in 0..3 {
                        assert!((back[c] as i32 - px[c] as i32).abs() <= 1, "{px:?} -> {back:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_color_stats_clamped() {
        let px: Vec<u8> = [90u8, 40, 160].repeat(16);
        let est = compute_stats(&px, None).unwrap();
        let lab = rgb_to_lab([90, 40, 160]);
        for c in 0..3 {
            assert!((est.stats.mean[c] - lab[c]).abs() < 1e-12);
            assert_eq!(est.stats.std[c], STD_EPSILON);
        }
        assert_eq!(est.clamped, [true; 3]);
    }

    #[test]
    fn two_pixel_stats() {
        let px = [10u8, 20, 30, 200, 100, 50];
        let a = rgb_to_lab([10, 20, 30]);
        let b = rgb_to_lab([200, 100, 50]);
        let est = compute_stats(&px, None).unwrap();
        assert!((est.stats.mean[0] - (a[0] + b[0]) / 2.0).abs() < 1e-12);
        assert!((est.stats.std[0] - (a[0] - b[0]).abs() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gray_is_achromatic() {
        let px: Vec<u8> = [128u8, 128, 128].repeat(4);
        let s = compute_stats(&px, None).unwrap().stats;
        assert!(s.mean[1].abs() < 2e-3, "{}", s.mean[1]);
        assert!(s.mean[2].abs() < 2e-3, "{}", s.mean[2]);
    }

    #[test]
    fn too_few_pixels() {
        assert!(compute_stats(&[1, 2, 3], None).is_err());
        let px = [1u8, 2, 3, 4, 5, 6];
        assert!(compute_stats(&px, Some(&[true, false])).is_err());
    }

    #[test]
    fn masked_stats_ignore_background() {
        let mut px = [200u8, 80, 120].repeat(4);
        px.extend([255u8, 255, 255].repeat(4));
        let mask = [true, true, true, true, false, false, false, false];
        let s = compute_stats(&px, Some(&mask)).unwrap().stats;
        assert!((s.mean[0] - rgb_to_lab([200, 80, 120])[0]).abs() < 1e-12);
    }

    #[test]
    fn identity_transfer() {
        let mut rng = Rng::new(5);
        let px = random_patch(&mut rng, 400);
        let s = compute_stats(&px, None).unwrap().stats;
        let out = normalize(&px, &s, &s).unwrap();
        for (a, b) in px.iter().zip(&out) {
            assert!((*a as i32 - *b as i32).abs() <= 1);
        }
    }

    #[test]
    fn constant_patch_maps_to_target_mean() {
        let px: Vec<u8> = [90u8, 40, 160].repeat(9);
        let target = LabStats {
            mean: rgb_to_lab([180, 100, 140]),
            std: [0.1, 0.02, 0.01],
        };
        let out = normalize_patch(&px, &target).unwrap();
        for p in out.chunks_exact(3) {
            assert_eq!(p, lab_to_rgb(target.mean));
        }
    }

    #[test]
    fn transferred_stats_match_target() {
        let mut rng = Rng::new(9);
        let px = random_patch(&mut rng, 500);
        let target = compute_stats(&random_patch(&mut rng, 500), None).unwrap().stats;
        let lab: Vec<_> = px.chunks_exact(3).map(|p| rgb_to_lab([p[0], p[1], p[2]])).collect();
        let src = stats_of_lab(&lab).unwrap().stats;
        let got = stats_of_lab(&normalize_lab(&lab, &src, &target)).unwrap().stats;
        for c in 0..3 {
            assert!((got.mean[c] - target.mean[c]).abs() < 1e-2);
            assert!((got.std[c] - target.std[c]).abs() < 1e-2);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = Rng::new(2);
        let px = random_patch(&mut rng, 100);
        let t = LabStats {
            mean: [1.5, 0.01, -0.02],
            std: [0.2, 0.05, 0.03],
        };
        assert_eq!(normalize_patch(&px, &t).unwrap(), normalize_patch(&px, &t).unwrap());
    }

    #[test]
    fn json_format() {
        let s = LabStats {
            mean: [1.23456789012, -0.5, 0.0],
            std: [0.1, 0.2, 0.3],
        };
        let j = s.to_json();
        assert_eq!(j, r#"{"mean":[1.23456789,-0.5,0.0],"std":[0.1,0.2,0.3]}"#);
        let back = LabStats::from_json(&j).unwrap();
        assert_eq!(back.mean[0], 1.23456789);
        assert!(LabStats::from_json(r#"{"mean":[0,0,0],"std":[0,1,1]}"#).is_err());
    }

    #[test]
    fn pooled_mean() {
        let a = LabStats { mean: [1.0, 0.0, 0.0], std: [0.2, 0.2, 0.2] };
        let b = LabStats { mean: [3.0, 0.2, 0.0], std: [0.4, 0.2, 0.2] };
        let p = pooled_target(&[a, b]).unwrap();
        assert!((p.mean[0] - 2.0).abs() < 1e-12);
        assert!((p.std[0] - 0.3).abs() < 1e-12);
        assert!(pooled_target(&[]).is_err());
    }
}
