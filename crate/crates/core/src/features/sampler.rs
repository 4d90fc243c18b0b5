//! Balanced mini-batches for outlier-exposure training: half normal rows,
//! the other half split evenly between near and far auxiliary tissue.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OeSamplerConfig {
    pub batch_size: usize,
    pub normal_fraction: f64,
    pub near_fraction_of_oe: f64,
}

impl Default for OeSamplerConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            normal_fraction: 0.5,
            near_fraction_of_oe: 0.5,
        }
    }
}

impl OeSamplerConfig {
    /// Row counts drawn from the (normal, near, far) pools.
    pub fn composition(&self) -> Result<(usize, usize, usize)> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.normal_fraction) || !(0.0..=1.0).contains(&self.near_fraction_of_oe) {
            return Err(Error::Config("sampler fractions must lie in [0,1]".into()));
        }
        let exact = |total: usize, frac: f64| -> Result<usize> {
            let v = total as f64 * frac;
            if (v - v.round()).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "batch size {} does not split evenly (fraction {frac} of {total})",
                    self.batch_size
                )));
            }
            Ok(v.round() as usize)
        };
        let normal = exact(self.batch_size, self.normal_fraction)?;
        let oe = self.batch_size - normal;
        let near = exact(oe, self.near_fraction_of_oe)?;
        Ok((normal, near, oe - near))
    }
}

fn draw(pool: &FeatureMatrix, count: usize, label: Label, rng: &mut Rng, out: &mut FeatureMatrix) -> Result<()> {
    for _ in 0..count {
        let i = rng.below(pool.len());
        let mut meta = pool.meta()[i].clone();
        meta.label = label;
        out.push(pool.row(i), meta)?;
    }
    Ok(())
}

/// Draws one batch uniformly with replacement from each pool. Normal rows
/// are labelled [`Label::Normal`] and OE rows [`Label::Anomalous`]; rows
/// appear grouped as normal, near, far. `rng` is advanced in place.
pub fn sample_batch(
    normal: &FeatureMatrix,
    near: &FeatureMatrix,
    far: &FeatureMatrix,
    cfg: &OeSamplerConfig,
    rng: &mut Rng,
) -> Result<FeatureMatrix> {
    let (n_normal, n_near, n_far) = cfg.composition()?;
    for (name, pool, need) in [("normal", normal, n_normal), ("near", near, n_near), ("far", far, n_far)] {
        if need > 0 && pool.is_empty() {
            return Err(Error::Config(format!("{name} pool is empty")));
        }
        if pool.dim() != normal.dim() {
            return Err(Error::DimMismatch {
                expected: normal.dim(),
                actual: pool.dim(),
            });
        }
    }
    let mut out = FeatureMatrix::empty(normal.dim());
    draw(normal, n_normal, Label::Normal, rng, &mut out)?;
    draw(near, n_near, Label::Anomalous, rng, &mut out)?;
    draw(far, n_far, Label::Anomalous, rng, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_util::matrix;
    use crate::features::TissueClass;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn pools() -> (FeatureMatrix, FeatureMatrix, FeatureMatrix) {
        (
            matrix(&[&[0.0], &[0.1], &[0.2]], TissueClass::NormalTarget, Label::Normal),
            matrix(&[&[1.0], &[1.1]], TissueClass::NearOe, Label::Unknown),
            matrix(&[&[5.0], &[5.1], &[5.2], &[5.3]], TissueClass::FarOe, Label::Unknown),
        )
    }

    fn count(b: &FeatureMatrix, class: TissueClass) -> usize {
        b.meta().iter().filter(|m| m.tissue_class == class).count()
    }

    #[test]
    fn default_batch_composition() {
        let (n, ne, f) = pools();
        let b = sample_batch(&n, &ne, &f, &OeSamplerConfig::default(), &mut Rng::new(1)).unwrap();
        assert_eq!(b.len(), 32);
        assert_eq!(count(&b, TissueClass::NormalTarget), 16);
        assert_eq!(count(&b, TissueClass::NearOe), 8);
        assert_eq!(count(&b, TissueClass::FarOe), 8);
        assert_eq!(b.meta().iter().filter(|m| m.label == Label::Anomalous).count(), 16);
    }

    #[test]
    fn forced_composition() {
        let n = matrix(&[&[0.0]], TissueClass::NormalTarget, Label::Normal);
        let ne = matrix(&[&[1.0]], TissueClass::NearOe, Label::Unknown);
        let f = matrix(&[&[2.0]], TissueClass::FarOe, Label::Unknown);
        let cfg = OeSamplerConfig {
            batch_size: 4,
            ..Default::default()
        };
        let b = sample_batch(&n, &ne, &f, &cfg, &mut Rng::new(0)).unwrap();
        let vals: Vec<f32> = b.rows().map(|r| r[0]).collect();
        assert_eq!(vals, vec![0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn deterministic_from_state() {
        let (n, ne, f) = pools();
        let cfg = OeSamplerConfig::default();
        let rng = Rng::new(42);
        let a = sample_batch(&n, &ne, &f, &cfg, &mut rng.clone()).unwrap();
        let b = sample_batch(&n, &ne, &f, &cfg, &mut rng.clone()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uneven_batch_rejected() {
        let cfg = OeSamplerConfig {
            batch_size: 6,
            ..Default::default()
        };
        assert!(cfg.composition().is_err());
    }

    #[test]
    fn empty_pool_is_config_error() {
        let (n, _, f) = pools();
        let empty = FeatureMatrix::empty(1);
        let r = sample_batch(&n, &empty, &f, &OeSamplerConfig::default(), &mut Rng::new(0));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn label_and_oe_counts_exact(quarter in 1usize..20, seed in any::<u64>()) {
            let (n, ne, f) = pools();
            let cfg = OeSamplerConfig { batch_size: quarter * 4, ..Default::default() };
            let b = sample_batch(&n, &ne, &f, &cfg, &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(b.meta().iter().filter(|m| m.label == Label::Normal).count(), quarter * 2);
            prop_assert_eq!(count(&b, TissueClass::NearOe), quarter);
            prop_assert_eq!(count(&b, TissueClass::FarOe), quarter);
        }
    }
}
