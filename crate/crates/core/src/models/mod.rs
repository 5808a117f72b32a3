//! The three model families, their losses, prediction, training, and checkpoints.

pub mod checkpoint;
mod config;
mod encoder;
mod gaussian;
mod mvae;
mod rvae;
mod svae;
mod train;

pub use config::{LikelihoodMode, ModelConfig, ModelKind};
pub use encoder::{decoder, GaussianEncoder};
pub use gaussian::{
    kl_gaussian_standard, kl_standard_normal, multinomial_log_likelihood, multinomial_rows,
    reparameterize, GaussianParams,
};
pub use mvae::MvaeModel;
pub use rvae::{RvaeModel, Triple};
pub use svae::{next_k_targets, SvaeModel, SvaeStep, SvaeTrace};
pub use train::{train, train_model, EpochStats, Model, TrainOutcome, SELECTION_CUTOFF};
