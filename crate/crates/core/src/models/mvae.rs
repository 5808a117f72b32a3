//! Multinomial VAE over a user's whole history treated as a bag of items.

use std::collections::HashSet;

use rand::Rng;

use super::encoder::{decoder, GaussianEncoder};
use super::gaussian::{kl_gaussian_standard, multinomial_rows, reparameterize};
use super::{ModelConfig, ModelKind};
use crate::autodiff::nn::DenseStack;
use crate::autodiff::{ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::eval::{rank_by_scores, Recommender};

#[derive(Clone, Debug)]
pub struct MvaeModel {
    pub config: ModelConfig,
    pub num_items: usize,
    pub store: ParameterStore,
    encoder: GaussianEncoder,
    decoder: DenseStack,
}

impl MvaeModel {
    pub fn new<R: Rng>(config: &ModelConfig, num_items: usize, rng: &mut R) -> Result<Self> {
        config.validate_for(ModelKind::Mvae)?;
        if num_items == 0 {
            return Err(Error::Config("empty item catalog".into()));
        }
        let mut store = ParameterStore::new();
        let encoder = GaussianEncoder::new(
            &mut store,
            "mvae.encoder",
            num_items,
            &config.encoder_widths,
            rng,
        )?;
        let decoder = decoder(
            &mut store,
            "mvae.decoder",
            config.latent_dim,
            config.decoder_hidden(),
            num_items,
            rng,
        )?;
        Ok(MvaeModel {
            config: config.clone(),
            num_items,
            store,
            encoder,
            decoder,
        })
    }

    /// Unit-norm indicator rows `[bags, N]`; an empty bag stays all-zero.
    pub fn bag_matrix(&self, bags: &[&[usize]]) -> Result<Tensor> {
        let n = self.num_items;
        let mut data = vec![0.0; bags.len() * n];
        for (r, bag) in bags.iter().enumerate() {
            let distinct: HashSet<usize> = bag.iter().copied().collect();
            if let Some(&bad) = distinct.iter().find(|&&i| i >= n) {
                return Err(Error::Index {
                    op: "mvae bag",
                    index: bad,
                    size: n,
                });
            }
            let scale = if distinct.is_empty() {
                0.0
            } else {
                1.0 / (distinct.len() as f64).sqrt()
            };
            for i in distinct {
                data[r * n + i] = scale;
            }
        }
        Tensor::new(vec![bags.len(), n], data)
    }

    /// `(β Σ_u KL_u − Σ_u log p(x_u | z_u)) / batch` with `eps: [batch, K]`.
    pub fn loss_in(
        &self,
        store: &ParameterStore,
        tape: &mut Tape,
        bags: &[&[usize]],
        eps: &Tensor,
        beta: f64,
    ) -> Result<Var> {
        if bags.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let x = tape.input(self.bag_matrix(bags)?);
        let posterior = self.encoder.forward(tape, store, x)?;
        let z = reparameterize(tape, &posterior, eps)?;
        let logits = self.decoder.forward(tape, store, z, false)?;
        let log_pi = tape.log_softmax(logits)?;
        let targets: Vec<Vec<usize>> = bags.iter().map(|b| b.to_vec()).collect();
        let recon = multinomial_rows(tape, log_pi, &targets)?;
        let kl = kl_gaussian_standard(tape, &posterior)?;
        let kl_total = tape.sum(kl);
        let recon_total = tape.sum(recon);
        let weighted_kl = tape.scale(kl_total, beta);
        let total = tape.sub(weighted_kl, recon_total)?;
        Ok(tape.scale(total, 1.0 / bags.len() as f64))
    }

    pub fn loss(&self, tape: &mut Tape, bags: &[&[usize]], eps: &Tensor, beta: f64) -> Result<Var> {
        self.loss_in(&self.store, tape, bags, eps, beta)
    }

    /// Decoder log-probabilities at z = μ(fold-in bag).
    pub fn log_probs(&self, fold_in: &[usize]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let x = tape.input(self.bag_matrix(&[fold_in])?);
        let mu = self.encoder.mean(&mut tape, &self.store, x)?;
        let logits = self.decoder.forward(&mut tape, &self.store, mu, false)?;
        let log_pi = tape.log_softmax(logits)?;
        Ok(tape.value(log_pi).data().to_vec())
    }

    pub fn predict(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        Ok(rank_by_scores(&self.log_probs(fold_in)?, exclude))
    }
}

impl Recommender for MvaeModel {
    fn name(&self) -> &str {
        "mvae"
    }

    fn recommend(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        self.predict(fold_in, exclude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradient_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize) -> MvaeModel {
        let config = ModelConfig {
            latent_dim: 3,
            encoder_widths: vec![4, 3],
            decoder_widths: vec![3, 4],
            ..ModelConfig::default()
        };
        MvaeModel::new(&config, n, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn uniform_decoder_reduces_to_counting() {
        let mut m = toy(5);
        let out = *m.decoder.layers.last().unwrap();
        m.store.get_mut(out.weight).data_mut().fill(0.0);
        m.store.get_mut(out.bias).data_mut().fill(0.0);
        let bags: [&[usize]; 2] = [&[0, 1, 2], &[4]];
        let mut tape = Tape::new();
        let eps = Tensor::full(&[2, 3], 0.3);
        let loss = m.loss(&mut tape, &bags, &eps, 0.0).unwrap();
        let expected = (3.0 * 5f64.ln() + 5f64.ln()) / 2.0;
        assert!((tape.value(loss).item().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn standard_posterior_has_no_kl() {
        let mut m = toy(5);
        for head in [m.encoder.mu, m.encoder.log_sigma] {
            m.store.get_mut(head.weight).data_mut().fill(0.0);
            m.store.get_mut(head.bias).data_mut().fill(0.0);
        }
        let bags: [&[usize]; 1] = [&[1, 3]];
        let eps = Tensor::zeros(&[1, 3]);
        let mut tape = Tape::new();
        let with_kl = m.loss(&mut tape, &bags, &eps, 1.0).unwrap();
        let without = m.loss(&mut tape, &bags, &eps, 0.0).unwrap();
        assert_eq!(tape.value(with_kl).data(), tape.value(without).data());
    }

    #[test]
    fn bag_order_is_irrelevant() {
        let m = toy(8);
        let ex: HashSet<usize> = [1, 4, 6].into();
        let a = m.predict(&[1, 4, 6], &ex).unwrap();
        let b = m.predict(&[6, 1, 4], &ex).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|i| !ex.contains(i)));
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn empty_bag_still_ranks() {
        let m = toy(8);
        assert_eq!(m.predict(&[], &HashSet::new()).unwrap().len(), 8);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = toy(5);
        let bags: [&[usize]; 2] = [&[0, 2, 3], &[1, 4]];
        let eps = Tensor::from_rows(&[vec![0.3, -1.1, 0.8], vec![-0.4, 0.2, 1.5]]).unwrap();
        let mut store = m.store.clone();
        let err = gradient_check(&mut store, 1e-5, |tape, s| {
            m.loss_in(s, tape, &bags, &eps, 1.0)
        })
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
