//! Sequential VAE: a GRU over the consumed items parameterizes a fresh Gaussian latent
//! at every step, and each latent decodes into a softmax over the catalog.
//!
//! Step `t` (1-based) reads items `1..t-1` only. Step 1 reads a learned start
//! embedding, stored as the extra last row of the item table.

use std::collections::HashSet;

use rand::Rng;

use super::encoder::{decoder, GaussianEncoder};
use super::gaussian::{kl_gaussian_standard, reparameterize, GaussianParams};
use super::{LikelihoodMode, ModelConfig, ModelKind};
use crate::autodiff::nn::{gru_cell, DenseStack, GruParams};
use crate::autodiff::{ParamId, ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::eval::{rank_by_scores, Recommender};

#[derive(Clone, Debug)]
pub struct SvaeModel {
    pub config: ModelConfig,
    pub num_items: usize,
    pub store: ParameterStore,
    item_embedding: ParamId,
    gru: GruParams,
    encoder: GaussianEncoder,
    decoder: DenseStack,
}

/// Tape handles for one forward pass over a length-`T` sequence; every tensor has one
/// row per step.
#[derive(Clone, Copy, Debug)]
pub struct SvaeTrace {
    pub posterior: GaussianParams,
    pub z: Var,
    pub log_pi: Var,
    pub steps: usize,
}

/// Plain values for a single step of [`SvaeTrace`].
#[derive(Clone, Debug, PartialEq)]
pub struct SvaeStep {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub z: Vec<f64>,
    pub log_pi: Vec<f64>,
}

impl SvaeTrace {
    pub fn step_values(&self, tape: &Tape) -> Vec<SvaeStep> {
        (0..self.steps)
            .map(|t| SvaeStep {
                mu: tape.value(self.posterior.mu).row_slice(t).to_vec(),
                log_sigma: tape.value(self.posterior.log_sigma).row_slice(t).to_vec(),
                z: tape.value(self.z).row_slice(t).to_vec(),
                log_pi: tape.value(self.log_pi).row_slice(t).to_vec(),
            })
            .collect()
    }
}

/// Items at 0-based positions `t .. min(t + k, len)`.
pub fn next_k_targets(items: &[usize], t: usize, k: usize) -> Result<&[usize]> {
    if t >= items.len() {
        return Err(Error::contract(format!(
            "step {} outside a sequence of length {}",
            t + 1,
            items.len()
        )));
    }
    Ok(&items[t..(t + k).min(items.len())])
}

impl SvaeModel {
    pub fn new<R: Rng>(config: &ModelConfig, num_items: usize, rng: &mut R) -> Result<Self> {
        config.validate_for(ModelKind::Svae)?;
        if num_items == 0 {
            return Err(Error::Config("empty item catalog".into()));
        }
        let mut store = ParameterStore::new();
        let item_embedding = store.add_normal(
            "svae.item_embedding",
            num_items + 1,
            config.item_embedding_dim,
            config.embedding_std,
            rng,
        )?;
        let gru = GruParams::new(
            &mut store,
            "svae.gru",
            config.item_embedding_dim,
            config.gru_hidden,
            rng,
        )?;
        let encoder = GaussianEncoder::new(
            &mut store,
            "svae.encoder",
            config.gru_hidden,
            &config.encoder_widths,
            rng,
        )?;
        let decoder = decoder(
            &mut store,
            "svae.decoder",
            config.latent_dim,
            config.decoder_hidden(),
            num_items,
            rng,
        )?;
        Ok(SvaeModel {
            config: config.clone(),
            num_items,
            store,
            item_embedding,
            gru,
            encoder,
            decoder,
        })
    }

    fn start_token(&self) -> usize {
        self.num_items
    }

    fn check_items(&self, items: &[usize]) -> Result<()> {
        match items.iter().find(|&&i| i >= self.num_items) {
            Some(&bad) => Err(Error::Index {
                op: "svae",
                index: bad,
                size: self.num_items,
            }),
            None => Ok(()),
        }
    }

    /// Hidden states `h_1 .. h_n` after reading the start token followed by `inputs`
    /// (so `n = inputs.len() + 1`), stacked into `[n, hidden]`.
    fn hidden_states(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        inputs: &[usize],
    ) -> Result<Var> {
        let hidden = self.config.gru_hidden;
        let table = tape.param(store, self.item_embedding);
        let mut h = tape.input(Tensor::zeros(&[1, hidden]));
        let mut states = Vec::with_capacity(inputs.len() + 1);
        for &id in std::iter::once(&self.start_token()).chain(inputs) {
            let x = tape.embedding(table, &[id])?;
            h = gru_cell(tape, store, &self.gru, x, h)?;
            states.push(h);
        }
        tape.stack_rows(&states)
    }

    /// Runs every step of `items` with per-step noise `eps: [T, K]`.
    pub fn forward_in(
        &self,
        store: &ParameterStore,
        tape: &mut Tape,
        items: &[usize],
        eps: &Tensor,
    ) -> Result<SvaeTrace> {
        if items.is_empty() {
            return Err(Error::contract("svae forward needs at least one item"));
        }
        self.check_items(items)?;
        let states = self.hidden_states(tape, store, &items[..items.len() - 1])?;
        let posterior = self.encoder.forward(tape, store, states)?;
        let z = reparameterize(tape, &posterior, eps)?;
        let logits = self.decoder.forward(tape, store, z, false)?;
        let log_pi = tape.log_softmax(logits)?;
        Ok(SvaeTrace {
            posterior,
            z,
            log_pi,
            steps: items.len(),
        })
    }

    pub fn forward(&self, tape: &mut Tape, items: &[usize], eps: &Tensor) -> Result<SvaeTrace> {
        self.forward_in(&self.store, tape, items, eps)
    }

    /// Sequence loss normalized by length:
    /// `(β Σ_t KL_t − Σ_t log p(targets_t | z_t)) / T`.
    #[allow(clippy::too_many_arguments)]
    pub fn loss_in(
        &self,
        store: &ParameterStore,
        tape: &mut Tape,
        items: &[usize],
        eps: &Tensor,
        beta: f64,
        k: usize,
        mode: LikelihoodMode,
    ) -> Result<Var> {
        if k == 0 {
            return Err(Error::contract("k must be at least 1"));
        }
        let trace = self.forward_in(store, tape, items, eps)?;
        let steps = items.len();

        let recon = match mode {
            LikelihoodMode::NextKMultiset => {
                let mut coords = Vec::new();
                let mut lens = Vec::with_capacity(steps);
                for t in 0..steps {
                    let targets = next_k_targets(items, t, k)?;
                    coords.extend(targets.iter().map(|&i| (t, i)));
                    lens.push(targets.len());
                }
                let picked = tape.gather(trace.log_pi, &coords)?;
                tape.segment_sum(picked, &lens)?
            }
            LikelihoodMode::Mixture => {
                let mut coords = Vec::new();
                let mut lens = Vec::with_capacity(steps);
                let mut log_weights = Vec::with_capacity(steps);
                for (t, &item) in items.iter().enumerate() {
                    let first = (t + 1).saturating_sub(k);
                    coords.extend((first..=t).map(|j| (j, item)));
                    let w = t + 1 - first;
                    lens.push(w);
                    log_weights.push(-(w as f64).ln());
                }
                let picked = tape.gather(trace.log_pi, &coords)?;
                let lse = tape.segment_log_sum_exp(picked, &lens)?;
                tape.add_const(lse, &Tensor::new(vec![steps], log_weights)?)?
            }
        };

        let kl = kl_gaussian_standard(tape, &trace.posterior)?;
        let kl_total = tape.sum(kl);
        let recon_total = tape.sum(recon);
        let weighted_kl = tape.scale(kl_total, beta);
        let total = tape.sub(weighted_kl, recon_total)?;
        Ok(tape.scale(total, 1.0 / steps as f64))
    }

    pub fn loss(
        &self,
        tape: &mut Tape,
        items: &[usize],
        eps: &Tensor,
        beta: f64,
        k: usize,
        mode: LikelihoodMode,
    ) -> Result<Var> {
        self.loss_in(&self.store, tape, items, eps, beta, k, mode)
    }

    /// Log-probabilities for the item following `history`, with z = μ.
    pub fn next_item_log_probs(&self, history: &[usize]) -> Result<Vec<f64>> {
        if history.is_empty() {
            return Err(Error::contract("svae prediction needs a nonempty history"));
        }
        self.check_items(history)?;
        let mut tape = Tape::new();
        let states = self.hidden_states(&mut tape, &self.store, history)?;
        let last = tape.value(states).row_slice(history.len()).to_vec();
        let h = tape.input(Tensor::row(&last));
        let mu = self.encoder.mean(&mut tape, &self.store, h)?;
        let logits = self.decoder.forward(&mut tape, &self.store, mu, false)?;
        let log_pi = tape.log_softmax(logits)?;
        Ok(tape.value(log_pi).data().to_vec())
    }

    pub fn predict(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        Ok(rank_by_scores(&self.next_item_log_probs(fold_in)?, exclude))
    }
}

impl Recommender for SvaeModel {
    fn name(&self) -> &str {
        "svae"
    }

    fn recommend(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        self.predict(fold_in, exclude)
    }
}
