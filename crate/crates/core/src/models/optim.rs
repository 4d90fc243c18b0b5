//! SGD with momentum, decoupled-in-velocity weight decay and global-norm
//! gradient clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: Option<f64>,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {} < 0", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0,1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight decay {} < 0", self.weight_decay)));
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip norm {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// Momentum buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub velocity: Vec<f64>,
}

impl SgdState {
    pub fn new(num_params: usize) -> Self {
        Self {
            velocity: vec![0.0; num_params],
        }
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One update:
///
/// ```text
/// g ← g · min(1, clip / ‖g‖)        (if clipping is configured)
/// v ← momentum · v + g + weight_decay · w
/// w ← w − lr · v
/// ```
///
/// Fails without touching `weights` if the gradient is not finite.
pub fn sgd_step(weights: &mut [f64], grads: &[f64], state: &mut SgdState, cfg: &SgdConfig) -> Result<()> {
    if weights.len() != grads.len() || state.velocity.len() != weights.len() {
        return Err(Error::DimMismatch {
            expected: weights.len(),
            actual: grads.len(),
        });
    }
    let norm = l2_norm(grads);
    if !norm.is_finite() {
        return Err(Error::NonFinite {
            step: 0,
            what: "gradient".into(),
        });
    }
    let scale = match cfg.grad_clip_norm {
        Some(c) if norm > c => c / norm,
        _ => 1.0,
    };
    for ((w, &g), v) in weights.iter_mut().zip(grads).zip(state.velocity.iter_mut()) {
        *v = cfg.momentum * *v + g * scale + cfg.weight_decay * *w;
        *w -= cfg.learning_rate * *v;
    }
    Ok(())
}
