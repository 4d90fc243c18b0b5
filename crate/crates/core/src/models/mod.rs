//! Trainable scoring heads over patch features.

mod checkpoint;
mod gradcheck;
pub mod losses;
mod mlp;
mod objective;
mod optim;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{check_gradient, finite_diff_check, FdReport, FD_ABS_FLOOR, FD_STEP};
pub use losses::{
    bce_loss_grad, compactness_loss_grad, deepsad_loss_grad, hsc_loss_grad, hsc_radius, reconstruction_loss_grad,
    sigmoid,
};
pub use mlp::{Activation, ForwardCache, LayerSpec, LayerWeights, MlpParams};
pub use objective::{accumulate_loss_grad, autoencoder_loss_grad, loss, loss_grad, score, Objective};
pub use optim::{l2_norm, sgd_step, SgdConfig, SgdState};
pub use train::{initial_center, train, HeadInit, TrainConfig, TrainOutput, TrainedModel, TrainingPools};
