use serde::{Deserialize, Serialize};

use crate::autodiff::Adam;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svae,
    Mvae,
    Rvae,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Svae => "svae",
            ModelKind::Mvae => "mvae",
            ModelKind::Rvae => "rvae",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svae" => Ok(ModelKind::Svae),
            "mvae" => Ok(ModelKind::Mvae),
            "rvae" => Ok(ModelKind::Rvae),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// How the sequential model scores the items around step `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodMode {
    /// The next `k` items form a multinomial draw from step `t`'s distribution.
    #[default]
    NextKMultiset,
    /// Item `t` is scored by a uniform mixture of the last `k` step distributions.
    Mixture,
}

impl std::str::FromStr for LikelihoodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "next-k-multiset" | "next-k" | "multiset" => Ok(LikelihoodMode::NextKMultiset),
            "mixture" => Ok(LikelihoodMode::Mixture),
            other => Err(Error::Config(format!("unknown likelihood mode {other:?}"))),
        }
    }
}

/// Hyperparameters shared by the three model families.
///
/// `encoder_widths` lists the encoder layers ending in the latent width, so its last
/// entry must equal `latent_dim`; the μ and log σ heads are that last layer.
/// `decoder_widths` starts at the latent width; an output layer over the catalog is
/// appended after the listed widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub item_embedding_dim: usize,
    pub gru_hidden: usize,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub rvae_embedding_dim: usize,
    pub rvae_encoder_widths: Vec<usize>,
    pub k_horizon: usize,
    pub likelihood: LikelihoodMode,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub kl_weight: f64,
    /// Epochs over which the KL weight ramps linearly from 0; 0 disables the ramp.
    pub kl_warmup_epochs: usize,
    pub epochs: usize,
    /// Mini-batch size for the bag and pairwise models.
    pub batch_size: usize,
    /// Std of the normal used for embedding tables.
    pub embedding_std: f64,
    /// Draw ε ~ N(0, I) during training; when false z = μ.
    pub sample_noise: bool,
    /// Probability that a training triple uses the shared unseen-user row.
    pub rvae_unseen_user_rate: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            latent_dim: 64,
            item_embedding_dim: 256,
            gru_hidden: 200,
            encoder_widths: vec![150, 64],
            decoder_widths: vec![64, 150],
            rvae_embedding_dim: 128,
            rvae_encoder_widths: vec![100, 64],
            k_horizon: 4,
            likelihood: LikelihoodMode::NextKMultiset,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            kl_weight: 1.0,
            kl_warmup_epochs: 0,
            epochs: 20,
            batch_size: 64,
            embedding_std: 1.0,
            sample_noise: true,
            rvae_unseen_user_rate: 0.1,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1".into());
        }
        if self.k_horizon == 0 {
            return bad("k_horizon must be at least 1".into());
        }
        let widths = [
            self.item_embedding_dim,
            self.gru_hidden,
            self.rvae_embedding_dim,
            self.batch_size,
        ];
        let lists = [
            &self.encoder_widths,
            &self.decoder_widths,
            &self.rvae_encoder_widths,
        ];
        if widths.contains(&0) || lists.iter().any(|l| l.contains(&0)) {
            return bad("all widths must be at least 1".into());
        }
        // written so that NaN fails too
        let in_range =
            self.learning_rate > 0.0 && self.weight_decay >= 0.0 && self.kl_weight >= 0.0;
        if !in_range {
            return bad(
                "learning_rate must be positive; weight_decay and kl_weight non-negative".into(),
            );
        }
        if !(0.0..=1.0).contains(&self.rvae_unseen_user_rate) {
            return bad("rvae_unseen_user_rate must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the width lists that `kind` actually reads.
    pub fn validate_for(&self, kind: ModelKind) -> Result<()> {
        self.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        let encoder = match kind {
            ModelKind::Svae | ModelKind::Mvae => ("encoder_widths", &self.encoder_widths),
            ModelKind::Rvae => ("rvae_encoder_widths", &self.rvae_encoder_widths),
        };
        if encoder.1.last() != Some(&self.latent_dim) {
            return bad(format!(
                "{} must end with latent_dim = {}",
                encoder.0, self.latent_dim
            ));
        }
        if kind != ModelKind::Rvae && self.decoder_widths.first() != Some(&self.latent_dim) {
            return bad(format!(
                "decoder_widths must start with latent_dim = {}",
                self.latent_dim
            ));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Adam {
        Adam::new(self.learning_rate, self.weight_decay)
    }

    /// KL weight for a 1-based epoch.
    pub fn kl_weight_at(&self, epoch: usize) -> f64 {
        if self.kl_warmup_epochs == 0 {
            self.kl_weight
        } else {
            let ramp = (epoch.saturating_sub(1) as f64 / self.kl_warmup_epochs as f64).min(1.0);
            self.kl_weight * ramp
        }
    }

    /// Hidden decoder layers (everything after the latent input).
    pub(crate) fn decoder_hidden(&self) -> &[usize] {
        &self.decoder_widths[1..]
    }
}
