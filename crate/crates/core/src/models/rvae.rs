//! Pairwise ranking VAE: each (user, item) pair gets its own latent code `z_{u,i}`, a
//! scalar scorer reads it, and the probability that `i` is preferred over `j` is
//! `σ(f(z_{u,i}) − f(z_{u,j}))`.

use std::collections::HashSet;

use rand::Rng;

use super::encoder::GaussianEncoder;
use super::gaussian::{kl_gaussian_standard, reparameterize};
use super::{ModelConfig, ModelKind};
use crate::autodiff::{ParamId, ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::eval::{rank_by_scores, Recommender};

/// One training comparison: `positive` is preferred over `negative` by the user in
/// embedding row `user_row`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triple {
    pub user_row: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Clone, Debug)]
pub struct RvaeModel {
    pub config: ModelConfig,
    pub num_items: usize,
    /// Training user indices in row order, ascending. Row `users.len()` is the shared
    /// row for everyone else.
    pub users: Vec<usize>,
    pub store: ParameterStore,
    user_embedding: ParamId,
    item_embedding: ParamId,
    encoder: GaussianEncoder,
    /// `[K, 1]`. No bias: a shared offset cancels in every score difference.
    scorer: ParamId,
}

impl RvaeModel {
    pub fn new<R: Rng>(
        config: &ModelConfig,
        num_items: usize,
        mut users: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate_for(ModelKind::Rvae)?;
        if num_items == 0 {
            return Err(Error::Config("empty item catalog".into()));
        }
        users.sort_unstable();
        users.dedup();
        let e = config.rvae_embedding_dim;
        let mut store = ParameterStore::new();
        let user_embedding = store.add_normal(
            "rvae.user_embedding",
            users.len() + 1,
            e,
            config.embedding_std,
            rng,
        )?;
        let item_embedding = store.add_normal(
            "rvae.item_embedding",
            num_items,
            e,
            config.embedding_std,
            rng,
        )?;
        let encoder = GaussianEncoder::new(
            &mut store,
            "rvae.encoder",
            2 * e,
            &config.rvae_encoder_widths,
            rng,
        )?;
        let scorer = store.add_uniform("rvae.scorer.weight", config.latent_dim, 1, rng)?;
        Ok(RvaeModel {
            config: config.clone(),
            num_items,
            users,
            store,
            user_embedding,
            item_embedding,
            encoder,
            scorer,
        })
    }

    pub fn unseen_row(&self) -> usize {
        self.users.len()
    }

    pub fn user_row(&self, user_index: usize) -> usize {
        self.users
            .binary_search(&user_index)
            .unwrap_or(self.unseen_row())
    }

    fn score(&self, tape: &mut Tape, store: &ParameterStore, z: Var) -> Result<Var> {
        let w = tape.param(store, self.scorer);
        tape.matmul(z, w)
    }

    fn pair_inputs(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        rows: &[usize],
        items: &[usize],
    ) -> Result<Var> {
        if let Some(&bad) = items.iter().find(|&&i| i >= self.num_items) {
            return Err(Error::Index {
                op: "rvae",
                index: bad,
                size: self.num_items,
            });
        }
        let users = tape.param(store, self.user_embedding);
        let items_table = tape.param(store, self.item_embedding);
        let u = tape.embedding(users, rows)?;
        let i = tape.embedding(items_table, items)?;
        tape.concat_cols(&[u, i])
    }

    /// Mean over triples of `−log σ(s_i − s_j) + β (KL_i + KL_j)`.
    ///
    /// `eps` is `[2B, K]`: rows `0..B` perturb the positive pairs, rows `B..2B` the
    /// negatives.
    pub fn loss_in(
        &self,
        store: &ParameterStore,
        tape: &mut Tape,
        triples: &[Triple],
        eps: &Tensor,
        beta: f64,
    ) -> Result<Var> {
        let b = triples.len();
        if b == 0 {
            return Err(Error::contract("empty batch"));
        }
        if let Some(t) = triples.iter().find(|t| t.positive == t.negative) {
            return Err(Error::contract(format!(
                "triple compares item {} with itself",
                t.positive
            )));
        }
        let rows: Vec<usize> = triples.iter().chain(triples).map(|t| t.user_row).collect();
        let items: Vec<usize> = triples
            .iter()
            .map(|t| t.positive)
            .chain(triples.iter().map(|t| t.negative))
            .collect();
        let x = self.pair_inputs(tape, store, &rows, &items)?;
        let posterior = self.encoder.forward(tape, store, x)?;
        let z = reparameterize(tape, &posterior, eps)?;
        let scores = self.score(tape, store, z)?;
        let pos: Vec<(usize, usize)> = (0..b).map(|r| (r, 0)).collect();
        let neg: Vec<(usize, usize)> = (b..2 * b).map(|r| (r, 0)).collect();
        let s_i = tape.gather(scores, &pos)?;
        let s_j = tape.gather(scores, &neg)?;
        let diff = tape.sub(s_i, s_j)?;
        let log_lik = tape.log_sigmoid(diff);
        let log_lik = tape.sum(log_lik);
        let kl = kl_gaussian_standard(tape, &posterior)?;
        let kl = tape.sum(kl);
        let weighted_kl = tape.scale(kl, beta);
        let total = tape.sub(weighted_kl, log_lik)?;
        Ok(tape.scale(total, 1.0 / b as f64))
    }

    pub fn loss(
        &self,
        tape: &mut Tape,
        triples: &[Triple],
        eps: &Tensor,
        beta: f64,
    ) -> Result<Var> {
        self.loss_in(&self.store, tape, triples, eps, beta)
    }

    /// `f(μ(u, i))` for every item, using embedding row `user_row`.
    pub fn scores(&self, user_row: usize) -> Result<Vec<f64>> {
        if user_row > self.unseen_row() {
            return Err(Error::Index {
                op: "rvae user row",
                index: user_row,
                size: self.unseen_row() + 1,
            });
        }
        let mut tape = Tape::new();
        let items: Vec<usize> = (0..self.num_items).collect();
        let x = self.pair_inputs(
            &mut tape,
            &self.store,
            &vec![user_row; self.num_items],
            &items,
        )?;
        let mu = self.encoder.mean(&mut tape, &self.store, x)?;
        let s = self.score(&mut tape, &self.store, mu)?;
        Ok(tape.value(s).data().to_vec())
    }

    /// Held-out users were never embedded, so they all go through the shared row.
    pub fn predict(&self, _fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        Ok(rank_by_scores(&self.scores(self.unseen_row())?, exclude))
    }
}

impl Recommender for RvaeModel {
    fn name(&self) -> &str {
        "rvae"
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

    fn toy() -> RvaeModel {
        let config = ModelConfig {
            latent_dim: 3,
            rvae_embedding_dim: 2,
            rvae_encoder_widths: vec![4, 3],
            embedding_std: 1.0,
            ..ModelConfig::default()
        };
        RvaeModel::new(&config, 6, vec![7, 2, 9], &mut ChaCha8Rng::seed_from_u64(8)).unwrap()
    }

    #[test]
    fn rows_follow_sorted_users() {
        let m = toy();
        assert_eq!(m.users, vec![2, 7, 9]);
        assert_eq!(m.user_row(7), 1);
        assert_eq!(m.user_row(4), 3);
        assert_eq!(m.unseen_row(), 3);
    }

    #[test]
    fn equal_scores_cost_log_two() {
        let mut m = toy();
        // A zero scorer gives every pair score 0; with β = 0 only −log σ(0) remains.
        m.store.get_mut(m.scorer).data_mut().fill(0.0);
        let t = [Triple {
            user_row: 0,
            positive: 1,
            negative: 4,
        }];
        let mut tape = Tape::new();
        let loss = m.loss(&mut tape, &t, &Tensor::zeros(&[2, 3]), 0.0).unwrap();
        assert!((tape.value(loss).item().unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_self_comparison() {
        let m = toy();
        let t = [Triple {
            user_row: 0,
            positive: 1,
            negative: 1,
        }];
        assert!(m
            .loss(&mut Tape::new(), &t, &Tensor::zeros(&[2, 3]), 1.0)
            .is_err());
    }

    #[test]
    fn identical_item_embeddings_tie_by_index() {
        let mut m = toy();
        let table = m.item_embedding;
        let e = m.config.rvae_embedding_dim;
        let copy = m.store.get(table).row_slice(4).to_vec();
        m.store.get_mut(table).data_mut()[e..2 * e].copy_from_slice(&copy);
        let ranked = m.predict(&[], &HashSet::new()).unwrap();
        let p1 = ranked.iter().position(|&i| i == 1).unwrap();
        let p4 = ranked.iter().position(|&i| i == 4).unwrap();
        assert_eq!(p4, p1 + 1);
        assert_eq!(ranked, m.predict(&[], &HashSet::new()).unwrap());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = toy();
        let triples = [
            Triple {
                user_row: 0,
                positive: 1,
                negative: 5,
            },
            Triple {
                user_row: 3,
                positive: 2,
                negative: 0,
            },
        ];
        let eps = Tensor::from_rows(&[
            vec![0.1, -0.6, 1.2],
            vec![-1.3, 0.4, 0.2],
            vec![0.7, 0.0, -0.9],
            vec![0.5, 1.1, -0.3],
        ])
        .unwrap();
        let mut store = m.store.clone();
        let err = gradient_check(&mut store, 1e-5, |tape, s| {
            m.loss_in(s, tape, &triples, &eps, 1.0)
        })
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
