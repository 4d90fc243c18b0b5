use serde::{Deserialize, Serialize};

use super::losses::{
    bce_loss_grad, compactness_loss_grad, deepsad_loss_grad, hsc_loss_grad, hsc_radius, reconstruction_loss_grad,
    sigmoid,
};
use super::mlp::MlpParams;
use crate::error::{Error, Result};

/// Training objective, which also fixes how a trained head scores a patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Outlier exposure with binary cross-entropy; score = P(anomalous).
    Bce,
    /// Outlier exposure with hypersphere classification; score = pseudo-Huber radius.
    Hsc,
    /// Outlier exposure with DeepSAD; score = squared center distance.
    #[serde(rename = "deepsad")]
    DeepSad,
    /// One-class compactness on normals only; score = squared center distance.
    Compactness,
    /// Feature reconstruction on normals only; score = reconstruction error.
    Autoencoder,
}

impl Objective {
    pub const ALL: [Objective; 5] = [
        Objective::Bce,
        Objective::Hsc,
        Objective::DeepSad,
        Objective::Compactness,
        Objective::Autoencoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Bce => "bce",
            Objective::Hsc => "hsc",
            Objective::DeepSad => "deepsad",
            Objective::Compactness => "compactness",
            Objective::Autoencoder => "autoencoder",
        }
    }

    /// Whether training draws auxiliary outlier batches.
    pub fn uses_outlier_exposure(self) -> bool {
        matches!(self, Objective::Bce | Objective::Hsc | Objective::DeepSad)
    }

    pub fn needs_center(self) -> bool {
        matches!(self, Objective::DeepSad | Objective::Compactness)
    }

    /// Output width the head must have for this objective.
    pub fn check_head(self, params: &MlpParams) -> Result<()> {
        let out = params.output_dim();
        let ok = match self {
            Objective::Bce => out == 1,
            Objective::Autoencoder => out == params.input_dim(),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "head with output width {out} cannot be trained with {}",
                self.name()
            )))
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective {s:?}")))
    }
}

fn center_for(objective: Objective, center: Option<&[f64]>) -> Result<&[f64]> {
    center.ok_or_else(|| Error::Config(format!("{objective} needs a center vector")))
}

/// Loss of one sample and dL/d(output) of the head.
fn output_loss_grad(
    objective: Objective,
    output: &[f64],
    x: &[f64],
    center: Option<&[f64]>,
    label: u8,
) -> Result<(f64, Vec<f64>)> {
    match objective {
        Objective::Bce => {
            let (l, g) = bce_loss_grad(output[0], label);
            Ok((l, vec![g]))
        }
        Objective::Hsc => Ok(hsc_loss_grad(output, label)),
        Objective::DeepSad => deepsad_loss_grad(output, center_for(objective, center)?, label),
        Objective::Compactness => compactness_loss_grad(output, center_for(objective, center)?),
        Objective::Autoencoder => reconstruction_loss_grad(output, x),
    }
}

/// Adds `scale`·dL/dθ for one sample into `grad`; returns the sample loss.
pub fn accumulate_loss_grad(
    objective: Objective,
    params: &MlpParams,
    center: Option<&[f64]>,
    x: &[f64],
    label: u8,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let cache = params.forward_cached(x)?;
    let (loss, d_out) = output_loss_grad(objective, cache.output(), x, center, label)?;
    params.backward_into(&cache, &d_out, scale, grad);
    Ok(loss)
}

/// Loss of one sample and its full parameter gradient.
pub fn loss_grad(
    objective: Objective,
    params: &MlpParams,
    center: Option<&[f64]>,
    x: &[f64],
    label: u8,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; params.num_params()];
    let loss = accumulate_loss_grad(objective, params, center, x, label, 1.0, &mut grad)?;
    Ok((loss, grad))
}

/// Loss of one sample without gradients.
pub fn loss(objective: Objective, params: &MlpParams, center: Option<&[f64]>, x: &[f64], label: u8) -> Result<f64> {
    let out = params.forward(x)?;
    Ok(output_loss_grad(objective, &out, x, center, label)?.0)
}

/// Reconstruction loss of an autoencoder head and its parameter gradient.
pub fn autoencoder_loss_grad(params: &MlpParams, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    Objective::Autoencoder.check_head(params)?;
    loss_grad(Objective::Autoencoder, params, None, x, 0)
}

/// Anomaly score of `x` under a head trained with `objective`.
pub fn score(objective: Objective, params: &MlpParams, center: Option<&[f64]>, x: &[f64]) -> Result<f64> {
    let out = params.forward(x)?;
    match objective {
        Objective::Bce => {
            if out.len() != 1 {
                return Err(Error::Config("classifier score needs a width-1 head".into()));
            }
            // keep saturated logits strictly inside (0, 1)
            Ok(sigmoid(out[0]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
        }
        Objective::Hsc => Ok(hsc_radius(&out)),
        Objective::DeepSad | Objective::Compactness => {
            let c = center_for(objective, center)?;
            if c.len() != out.len() {
                return Err(Error::DimMismatch {
                    expected: out.len(),
                    actual: c.len(),
                });
            }
            Ok(out.iter().zip(c).map(|(p, q)| (p - q).powi(2)).sum())
        }
        Objective::Autoencoder => Ok(reconstruction_loss_grad(&out, x)?.0),
    }
}
