use rand::Rng;

use super::gaussian::GaussianParams;
use crate::autodiff::nn::{Dense, DenseStack};
use crate::autodiff::{ParameterStore, Tape, Var};
use crate::error::Result;

/// tanh hidden layers followed by linear μ and log σ heads.
#[derive(Clone, Debug)]
pub struct GaussianEncoder {
    pub hidden: DenseStack,
    pub mu: Dense,
    pub log_sigma: Dense,
}

impl GaussianEncoder {
    /// `widths` ends with the latent width; earlier entries are hidden layers.
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input: usize,
        widths: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let (&latent, hidden) = widths.split_last().expect("validated nonempty");
        let stack = DenseStack::new(store, &format!("{name}.hidden"), input, hidden, rng)?;
        let last = hidden.last().copied().unwrap_or(input);
        Ok(GaussianEncoder {
            hidden: stack,
            mu: Dense::new(store, &format!("{name}.mu"), last, latent, rng)?,
            log_sigma: Dense::new(store, &format!("{name}.log_sigma"), last, latent, rng)?,
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        x: Var,
    ) -> Result<GaussianParams> {
        let h = self.hidden.forward(tape, store, x, true)?;
        Ok(GaussianParams {
            mu: self.mu.forward(tape, store, h)?,
            log_sigma: self.log_sigma.forward(tape, store, h)?,
        })
    }

    /// μ only; the noise-free code used at prediction time.
    pub fn mean(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var> {
        let h = self.hidden.forward(tape, store, x, true)?;
        self.mu.forward(tape, store, h)
    }
}

/// Latent code to logits: tanh hidden layers and a linear output layer.
pub fn decoder<R: Rng>(
    store: &mut ParameterStore,
    name: &str,
    latent: usize,
    hidden: &[usize],
    output: usize,
    rng: &mut R,
) -> Result<DenseStack> {
    let mut widths = hidden.to_vec();
    widths.push(output);
    DenseStack::new(store, name, latent, &widths, rng)
}
