//! Mini-batch training of scoring heads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use super::objective::{accumulate_loss_grad, score, Objective};
use super::optim::{sgd_step, SgdConfig, SgdState};
use crate::error::{Error, Result};
use crate::features::{sample_batch, FeatureMatrix, Label, OeSamplerConfig};
use crate::rng::{streams, Rng};

/// Starting point of a metric head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadInit {
    /// Uniform(−1/√fan_in, 1/√fan_in) weights.
    #[default]
    Random,
    /// Exact identity on the input features (hidden width 2·D, embedding
    /// width D), so fine-tuning starts from the supplied representation.
    /// `hidden_width` and `embed_dim` are ignored.
    Identity,
}

/// Optimizer and architecture settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub objective: Objective,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    pub hidden_width: usize,
    /// Output width of metric heads (HSC, DeepSAD, compactness).
    pub embed_dim: usize,
    /// Latent width of the autoencoder.
    pub bottleneck: usize,
    /// Only metric heads (HSC, DeepSAD, compactness) accept `identity`.
    pub head_init: HeadInit,
    /// Share of the auxiliary half of each batch drawn from near tissue.
    pub near_fraction_of_oe: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::outlier_exposure(Objective::Bce)
    }
}

impl TrainConfig {
    /// SGD(momentum 0.9), lr 5e-4, batch 32, weight decay 1e-4.
    pub fn outlier_exposure(objective: Objective) -> Self {
        Self {
            objective,
            learning_rate: 5e-4,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 32,
            steps: 10_000,
            grad_clip_norm: None,
            seed: 0,
            hidden_width: 128,
            embed_dim: 32,
            bottleneck: 8,
            head_init: HeadInit::Random,
            near_fraction_of_oe: 0.5,
        }
    }

    /// Plain SGD, lr 1e-2, batch 32, gradient norm clipped to 1e-3, head
    /// starting at the identity.
    pub fn one_class() -> Self {
        Self {
            objective: Objective::Compactness,
            head_init: HeadInit::Identity,
            learning_rate: 1e-2,
            momentum: 0.0,
            weight_decay: 0.0,
            grad_clip_norm: Some(1e-3),
            ..Self::outlier_exposure(Objective::Compactness)
        }
    }

    pub fn autoencoder() -> Self {
        Self {
            objective: Objective::Autoencoder,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            ..Self::outlier_exposure(Objective::Autoencoder)
        }
    }

    /// Defaults appropriate to `objective`.
    pub fn for_objective(objective: Objective) -> Self {
        match objective {
            Objective::Compactness => Self::one_class(),
            Objective::Autoencoder => Self::autoencoder(),
            o => Self::outlier_exposure(o),
        }
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            grad_clip_norm: self.grad_clip_norm,
        }
    }

    pub fn sampler(&self) -> OeSamplerConfig {
        OeSamplerConfig {
            batch_size: self.batch_size,
            normal_fraction: 0.5,
            near_fraction_of_oe: self.near_fraction_of_oe,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        self.sgd().validate()?;
        if self.batch_size == 0 || self.hidden_width == 0 || self.embed_dim == 0 || self.bottleneck == 0 {
            return Err(Error::Config("batch size and layer widths must be positive".into()));
        }
        if self.head_init == HeadInit::Identity && matches!(self.objective, Objective::Bce | Objective::Autoencoder) {
            return Err(Error::Config(format!("{} does not support identity head init", self.objective)));
        }
        if self.objective.uses_outlier_exposure() {
            self.sampler().composition()?;
        }
        Ok(())
    }

    /// Fresh head for `input` features, initialized from the seeded stream.
    pub fn init_head(&self, input: usize) -> Result<MlpParams> {
        let mut rng = Rng::split(self.seed, streams::INIT);
        match (self.objective, self.head_init) {
            (Objective::Hsc | Objective::DeepSad | Objective::Compactness, HeadInit::Identity) => {
                return MlpParams::identity_metric(input)
            }
            (o, HeadInit::Identity) => return Err(Error::Config(format!("{o} does not support identity head init"))),
            _ => {}
        }
        match self.objective {
            Objective::Bce => MlpParams::classifier(input, self.hidden_width, &mut rng),
            Objective::Hsc | Objective::DeepSad | Objective::Compactness => {
                MlpParams::metric(input, self.hidden_width, self.embed_dim, &mut rng)
            }
            Objective::Autoencoder => MlpParams::autoencoder(input, self.hidden_width, self.bottleneck, &mut rng),
        }
    }
}

/// A trained head together with what is needed to score with it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub objective: Objective,
    pub params: MlpParams,
    pub center: Option<Vec<f64>>,
    pub config: TrainConfig,
}

impl TrainedModel {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        score(self.objective, &self.params, self.center.as_deref(), x)
    }

    /// Head output for `x` (logit, embedding or reconstruction).
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.params.forward(x)
    }

    /// Scores every row; rows are independent so this runs in parallel.
    pub fn score_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        (0..m.len()).into_par_iter().map(|i| self.score(&m.row_f64(i))).collect()
    }

    /// Embeds every row into a new matrix with the same metadata.
    pub fn embed_matrix(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let rows: Vec<Vec<f64>> = (0..m.len())
            .into_par_iter()
            .map(|i| self.embed(&m.row_f64(i)))
            .collect::<Result<_>>()?;
        let data = rows.iter().flatten().map(|&v| v as f32).collect();
        FeatureMatrix::new(self.params.output_dim(), data, m.meta().to_vec())
    }
}

/// Training data: normal rows always; near/far auxiliary rows for the
/// outlier-exposure objectives.
#[derive(Clone, Copy, Debug)]
pub struct TrainingPools<'a> {
    pub normal: &'a FeatureMatrix,
    pub near: Option<&'a FeatureMatrix>,
    pub far: Option<&'a FeatureMatrix>,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: TrainedModel,
    /// Mean batch loss before each update.
    pub loss_trace: Vec<f64>,
}

/// Mean head output over the normal pool under the initial parameters.
pub fn initial_center(params: &MlpParams, normal: &FeatureMatrix) -> Result<Vec<f64>> {
    if normal.is_empty() {
        return Err(Error::Empty("no normal rows to place the center".into()));
    }
    let mut sum = vec![0.0; params.output_dim()];
    for i in 0..normal.len() {
        for (s, v) in sum.iter_mut().zip(params.forward(&normal.row_f64(i))?) {
            *s += v;
        }
    }
    let n = normal.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn normal_batch(normal: &FeatureMatrix, batch_size: usize, rng: &mut Rng) -> FeatureMatrix {
    let idx: Vec<usize> = (0..batch_size).map(|_| rng.below(normal.len())).collect();
    let mut b = normal.select(&idx);
    b.set_label(Label::Normal);
    b
}

/// Runs `cfg.steps` SGD updates. Deterministic for a given seed.
pub fn train(pools: TrainingPools<'_>, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if pools.normal.is_empty() {
        return Err(Error::Config("normal pool is empty".into()));
    }
    let dim = pools.normal.dim();
    let mut params = cfg.init_head(dim)?;
    cfg.objective.check_head(&params)?;
    let center = if cfg.objective.needs_center() {
        Some(initial_center(&params, pools.normal)?)
    } else {
        None
    };
    let (near, far) = if cfg.objective.uses_outlier_exposure() {
        let empty = || Error::Config(format!("{} needs near and far outlier pools", cfg.objective));
        (pools.near.ok_or_else(empty)?, pools.far.ok_or_else(empty)?)
    } else {
        (pools.normal, pools.normal)
    };

    let sgd = cfg.sgd();
    let sampler = cfg.sampler();
    let mut rng = Rng::split(cfg.seed, streams::SAMPLER);
    let mut state = SgdState::new(params.num_params());
    let mut grad = vec![0.0; params.num_params()];
    let mut loss_trace = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let batch = if cfg.objective.uses_outlier_exposure() {
            sample_batch(pools.normal, near, far, &sampler, &mut rng)?
        } else {
            normal_batch(pools.normal, cfg.batch_size, &mut rng)
        };
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for i in 0..batch.len() {
            let label = batch.meta()[i].label.as_target().unwrap_or(0);
            total += accumulate_loss_grad(
                cfg.objective,
                &params,
                center.as_deref(),
                &batch.row_f64(i),
                label,
                scale,
                &mut grad,
            )?;
        }
        let mean_loss = total * scale;
        if !mean_loss.is_finite() {
            return Err(Error::NonFinite {
                step,
                what: format!("loss {mean_loss}"),
            });
        }
        loss_trace.push(mean_loss);
        sgd_step(params.values_mut(), &grad, &mut state, &sgd).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { step, what },
            e => e,
        })?;
        if params.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step,
                what: "parameters diverged".into(),
            });
        }
    }

    Ok(TrainOutput {
        model: TrainedModel {
            objective: cfg.objective,
            params,
            center,
            config: cfg.clone(),
        },
        loss_trace,
    })
}
