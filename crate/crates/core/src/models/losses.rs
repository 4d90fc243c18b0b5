//! Per-sample objectives with analytic gradients.
//!
//! Labels follow the outlier-exposure convention: 0 = normal, 1 = auxiliary
//! or true anomaly.

use crate::error::{Error, Result};

/// Lower clamp on the HSC radius before the outlier log term.
pub const HSC_EPSILON: f64 = 1e-9;
/// Lower clamp on the squared center distance for DeepSAD outliers.
pub const DEEPSAD_EPSILON: f64 = 1e-6;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit: `(loss, dloss/dlogit)`.
pub fn bce_loss_grad(logit: f64, label: u8) -> (f64, f64) {
    let y = label as f64;
    // max(z,0) − z·y + log(1 + e^−|z|)
    let loss = logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - y)
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: b.len(),
            actual: a.len(),
        });
    }
    Ok(())
}

/// Pseudo-Huber radius √(‖φ‖² + 1) − 1, the HSC anomaly score.
pub fn hsc_radius(embedding: &[f64]) -> f64 {
    let sq: f64 = embedding.iter().map(|v| v * v).sum();
    // (sq+1).sqrt()-1 loses precision for tiny sq
    sq / ((sq + 1.0).sqrt() + 1.0)
}

/// Hypersphere classification loss.
///
/// Normal: `s`. Anomalous: `−log(1 − exp(−max(s, ε)))`, where `s` is the
/// pseudo-Huber radius of the embedding.
pub fn hsc_loss_grad(embedding: &[f64], label: u8) -> (f64, Vec<f64>) {
    let sq: f64 = embedding.iter().map(|v| v * v).sum();
    let root = (sq + 1.0).sqrt();
    let s = hsc_radius(embedding);
    // ds/dφ = φ / √(‖φ‖²+1)
    let (loss, dl_ds) = if label == 0 {
        (s, 1.0)
    } else if s > HSC_EPSILON {
        (-(-(-s).exp_m1()).ln(), -1.0 / s.exp_m1())
    } else {
        (-(-(-HSC_EPSILON).exp_m1()).ln(), 0.0)
    };
    let grad = embedding.iter().map(|v| dl_ds * v / root).collect();
    (loss, grad)
}

/// DeepSAD loss: `d²` for normals, `1 / max(d², ε)` for anomalies, with
/// `d² = ‖φ − c‖²`.
pub fn deepsad_loss_grad(embedding: &[f64], center: &[f64], label: u8) -> Result<(f64, Vec<f64>)> {
    check_dims(embedding, center)?;
    let diff: Vec<f64> = embedding.iter().zip(center).map(|(p, c)| p - c).collect();
    let d2: f64 = diff.iter().map(|v| v * v).sum();
    if label == 0 {
        return Ok((d2, diff.iter().map(|v| 2.0 * v).collect()));
    }
    if d2 > DEEPSAD_EPSILON {
        let scale = -2.0 / (d2 * d2);
        Ok((1.0 / d2, diff.iter().map(|v| scale * v).collect()))
    } else {
        Ok((1.0 / DEEPSAD_EPSILON, vec![0.0; diff.len()]))
    }
}

/// One-class compactness: `‖φ − c‖²` with gradient `2(φ − c)`.
pub fn compactness_loss_grad(embedding: &[f64], center: &[f64]) -> Result<(f64, Vec<f64>)> {
    deepsad_loss_grad(embedding, center, 0)
}

/// Mean squared reconstruction error `(1/D)‖x̂ − x‖²` and its gradient with
/// respect to the reconstruction.
pub fn reconstruction_loss_grad(reconstruction: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dims(reconstruction, x)?;
    let d = x.len() as f64;
    let diff: Vec<f64> = reconstruction.iter().zip(x).map(|(r, v)| r - v).collect();
    let loss = diff.iter().map(|v| v * v).sum::<f64>() / d;
    Ok((loss, diff.iter().map(|v| 2.0 * v / d).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bce_examples() {
        let (l, g) = bce_loss_grad(0.0, 1);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g + 0.5).abs() < 1e-12);
        let (l, g) = bce_loss_grad(50.0, 1);
        assert!((0.0..=1e-20).contains(&l));
        assert!(g.abs() < 1e-20);
        let (l, g) = bce_loss_grad(1.0, 0);
        assert!((l - 1.3132617).abs() < 1e-6);
        assert!((g - 0.7310586).abs() < 1e-6);
        let (l, _) = bce_loss_grad(-800.0, 1);
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn hsc_examples() {
        let (l, g) = hsc_loss_grad(&[0.0, 0.0], 0);
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (l, _) = hsc_loss_grad(&[3f64.sqrt()], 0);
        assert!((l - 1.0).abs() < 1e-12);
        let (l, g) = hsc_loss_grad(&[0.0], 1);
        assert!((l - 20.723265837).abs() < 1e-6, "{l}");
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn hsc_anomalous_gradient_matches_differences() {
        let phi = [0.7, -1.3, 0.2];
        let (_, g) = hsc_loss_grad(&phi, 1);
        let h = 1e-6;
        for i in 0..phi.len() {
            let mut up = phi;
            let mut down = phi;
            up[i] += h;
            down[i] -= h;
            let numeric = (hsc_loss_grad(&up, 1).0 - hsc_loss_grad(&down, 1).0) / (2.0 * h);
            assert!((g[i] - numeric).abs() < 1e-7, "{i}: {} vs {numeric}", g[i]);
        }
        // pulling an anomaly outward lowers its loss
        assert!(g[0] < 0.0 && g[1] > 0.0);
    }

    #[test]
    fn deepsad_examples() {
        let c = [1.0, -1.0];
        let (l, g) = deepsad_loss_grad(&c, &c, 0).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0, 0.0]));
        let (l, g) = deepsad_loss_grad(&[2.0, 1.0], &c, 0).unwrap();
        assert_eq!(l, 5.0);
        assert_eq!(g, vec![2.0, 4.0]);
        let (l, _) = deepsad_loss_grad(&c, &c, 1).unwrap();
        assert!((l - 1e6).abs() < 1e-6);
        assert!(deepsad_loss_grad(&[1.0], &c, 0).is_err());
    }

    #[test]
    fn compactness_examples() {
        assert_eq!(compactness_loss_grad(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.0);
        assert_eq!(compactness_loss_grad(&[3.0, 4.0], &[0.0, 0.0]).unwrap().0, 25.0);
        let center = [(0.0 + 2.0) / 2.0, 0.0];
        assert_eq!(compactness_loss_grad(&[0.0, 0.0], &center).unwrap().0, 1.0);
    }

    #[test]
    fn reconstruction_examples() {
        let x = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(reconstruction_loss_grad(&x, &x).unwrap().0, 0.0);
        assert_eq!(reconstruction_loss_grad(&[0.0; 4], &x).unwrap().0, 1.0);
    }

    proptest! {
        #[test]
        fn bce_nonnegative(z in -1e3f64..1e3, y in 0u8..2) {
            let (l, g) = bce_loss_grad(z, y);
            prop_assert!(l >= 0.0 && l.is_finite());
            prop_assert!(g.abs() <= 1.0);
        }

        #[test]
        fn bce_ln2_at_zero(y in 0u8..2) {
            prop_assert!((bce_loss_grad(0.0, y).0 - std::f64::consts::LN_2).abs() < 1e-15);
        }

        #[test]
        fn hsc_deepsad_finite(v in proptest::collection::vec(-1e3f64..1e3, 1..6), y in 0u8..2) {
            let (l, g) = hsc_loss_grad(&v, y);
            prop_assert!(l >= 0.0 && l.is_finite());
            prop_assert!(g.iter().all(|x| x.is_finite()));
            let c: Vec<f64> = v.iter().map(|x| x * 0.5).collect();
            let (l, g) = deepsad_loss_grad(&v, &c, y).unwrap();
            prop_assert!(l >= 0.0 && l.is_finite());
            prop_assert!(g.iter().all(|x| x.is_finite()));
        }
    }
}
