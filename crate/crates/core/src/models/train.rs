//! Seeded training loops with per-epoch validation and best-epoch selection.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::rvae::Triple;
use super::{ModelConfig, ModelKind, MvaeModel, RvaeModel, SvaeModel};
use crate::autodiff::{Adam, ParameterStore, Tape, Tensor, Var};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, Metric, Recommender};

/// The cutoff used for model selection.
pub const SELECTION_CUTOFF: usize = 100;

#[derive(Clone, Debug)]
pub enum Model {
    Svae(SvaeModel),
    Mvae(MvaeModel),
    Rvae(RvaeModel),
}

impl Model {
    /// Fresh parameters drawn from `rng`.
    pub fn init<R: Rng>(
        kind: ModelKind,
        config: &ModelConfig,
        split: &DatasetSplit,
        rng: &mut R,
    ) -> Result<Self> {
        let users = split.train.iter().map(|s| s.user_index).collect();
        Model::build(kind, config, split.num_items(), users, rng)
    }

    /// `train_users` only matters for the pairwise model, which embeds each of them.
    pub fn build<R: Rng>(
        kind: ModelKind,
        config: &ModelConfig,
        num_items: usize,
        train_users: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            ModelKind::Svae => Model::Svae(SvaeModel::new(config, num_items, rng)?),
            ModelKind::Mvae => Model::Mvae(MvaeModel::new(config, num_items, rng)?),
            ModelKind::Rvae => Model::Rvae(RvaeModel::new(config, num_items, train_users, rng)?),
        })
    }

    /// Users with their own embedding row; empty for the other models.
    pub fn train_users(&self) -> &[usize] {
        match self {
            Model::Rvae(m) => &m.users,
            _ => &[],
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Svae(_) => ModelKind::Svae,
            Model::Mvae(_) => ModelKind::Mvae,
            Model::Rvae(_) => ModelKind::Rvae,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::Svae(m) => &m.config,
            Model::Mvae(m) => &m.config,
            Model::Rvae(m) => &m.config,
        }
    }

    pub fn num_items(&self) -> usize {
        match self {
            Model::Svae(m) => m.num_items,
            Model::Mvae(m) => m.num_items,
            Model::Rvae(m) => m.num_items,
        }
    }

    pub fn store(&self) -> &ParameterStore {
        match self {
            Model::Svae(m) => &m.store,
            Model::Mvae(m) => &m.store,
            Model::Rvae(m) => &m.store,
        }
    }

    /// Per-item ranking scores after `fold_in`: log-probabilities for the generative
    /// models, scorer outputs for the pairwise one.
    pub fn scores(&self, fold_in: &[usize]) -> Result<Vec<f64>> {
        match self {
            Model::Svae(m) => m.next_item_log_probs(fold_in),
            Model::Mvae(m) => m.log_probs(fold_in),
            Model::Rvae(m) => m.scores(m.unseen_row()),
        }
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        match self {
            Model::Svae(m) => &mut m.store,
            Model::Mvae(m) => &mut m.store,
            Model::Rvae(m) => &mut m.store,
        }
    }
}

impl Recommender for Model {
    fn name(&self) -> &str {
        self.kind().as_str()
    }

    fn recommend(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        match self {
            Model::Svae(m) => m.predict(fold_in, exclude),
            Model::Mvae(m) => m.predict(fold_in, exclude),
            Model::Rvae(m) => m.predict(fold_in, exclude),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the epoch's optimizer steps.
    pub train_loss: f64,
    /// `None` when the split has no validation users.
    pub val_ndcg100: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch, or the last epoch without validation.
    pub model: Model,
    pub curve: Vec<EpochStats>,
    /// 0 means the initial parameters were kept.
    pub best_epoch: usize,
    pub best_val_ndcg100: Option<f64>,
}

fn noise<R: Rng>(rng: &mut R, rows: usize, k: usize, sample: bool) -> Tensor {
    let data = if sample {
        (0..rows * k).map(|_| rng.sample(StandardNormal)).collect()
    } else {
        vec![0.0; rows * k]
    };
    Tensor::new(vec![rows, k], data).expect("shape matches")
}

fn validation_score(model: &Model, split: &DatasetSplit) -> Result<Option<f64>> {
    if split.validation.is_empty() {
        return Ok(None);
    }
    let opts = EvalOptions {
        cutoffs: vec![SELECTION_CUTOFF],
        ..EvalOptions::default()
    };
    let report = evaluate(model, &split.validation, &opts)?;
    Ok(report.get(Metric::Ndcg, SELECTION_CUTOFF))
}

struct StepCtx<'a> {
    optimizer: &'a Adam,
    epoch: usize,
    total: f64,
    steps: usize,
}

impl StepCtx<'_> {
    /// Backpropagates `build`'s loss into `store` and takes one optimizer step.
    fn step<F>(&mut self, store: &mut ParameterStore, build: F) -> Result<()>
    where
        F: FnOnce(&ParameterStore, &mut Tape) -> Result<Var>,
    {
        let mut tape = Tape::new();
        let loss = build(store, &mut tape)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                batch: self.steps + 1,
                loss: value,
            });
        }
        tape.backward(loss, store)?;
        self.optimizer.step(store)?;
        self.total += value;
        self.steps += 1;
        Ok(())
    }

    fn mean(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total / self.steps as f64
        }
    }
}

/// One uniformly drawn unconsumed item per consumed item, per training user.
fn sample_triples<R: Rng>(model: &RvaeModel, split: &DatasetSplit, rng: &mut R) -> Vec<Triple> {
    let n = model.num_items;
    let mut triples = Vec::new();
    for seq in &split.train {
        let consumed: HashSet<usize> = seq.items.iter().copied().collect();
        if consumed.len() >= n {
            continue;
        }
        let own_row = model.user_row(seq.user_index);
        let mut positives: Vec<usize> = consumed.iter().copied().collect();
        positives.sort_unstable();
        for positive in positives {
            let negative = loop {
                let j = rng.random_range(0..n);
                if !consumed.contains(&j) {
                    break j;
                }
            };
            let user_row = if rng.random_bool(model.config.rvae_unseen_user_rate) {
                model.unseen_row()
            } else {
                own_row
            };
            triples.push(Triple {
                user_row,
                positive,
                negative,
            });
        }
    }
    triples
}

fn run_epoch(
    model: &mut Model,
    split: &DatasetSplit,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let config = model.config().clone();
    let optimizer = config.optimizer();
    let beta = config.kl_weight_at(epoch);
    let k = config.latent_dim;
    let mut ctx = StepCtx {
        optimizer: &optimizer,
        epoch,
        total: 0.0,
        steps: 0,
    };
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    order.shuffle(rng);

    match model {
        Model::Svae(m) => {
            let mut store = std::mem::take(&mut m.store);
            let result = order.iter().try_for_each(|&u| {
                let items = &split.train[u].items;
                let eps = noise(rng, items.len(), k, config.sample_noise);
                ctx.step(&mut store, |s, tape| {
                    m.loss_in(
                        s,
                        tape,
                        items,
                        &eps,
                        beta,
                        config.k_horizon,
                        config.likelihood,
                    )
                })
            });
            m.store = store;
            result?;
        }
        Model::Mvae(m) => {
            let mut store = std::mem::take(&mut m.store);
            let result = order.chunks(config.batch_size).try_for_each(|chunk| {
                let bags: Vec<&[usize]> = chunk
                    .iter()
                    .map(|&u| split.train[u].items.as_slice())
                    .collect();
                let eps = noise(rng, bags.len(), k, config.sample_noise);
                ctx.step(&mut store, |s, tape| m.loss_in(s, tape, &bags, &eps, beta))
            });
            m.store = store;
            result?;
        }
        Model::Rvae(m) => {
            let mut triples = sample_triples(m, split, rng);
            triples.shuffle(rng);
            let mut store = std::mem::take(&mut m.store);
            let result = triples.chunks(config.batch_size).try_for_each(|batch| {
                let eps = noise(rng, 2 * batch.len(), k, config.sample_noise);
                ctx.step(&mut store, |s, tape| m.loss_in(s, tape, batch, &eps, beta))
            });
            m.store = store;
            result?;
        }
    }
    Ok(ctx.mean())
}

/// Trains `kind` on `split.train`, scoring NDCG@100 on the validation users after every
/// epoch and keeping the best-scoring parameters. `on_epoch` sees each epoch's stats as
/// soon as they are known.
pub fn train<F>(
    kind: ModelKind,
    split: &DatasetSplit,
    config: &ModelConfig,
    on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochStats),
{
    config.validate_for(kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = Model::init(kind, config, split, &mut rng)?;
    train_model(model, split, config.epochs, &mut rng, on_epoch)
}

/// Continues training an existing model for `epochs` epochs, drawing all randomness
/// from `rng`.
pub fn train_model<F>(
    mut model: Model,
    split: &DatasetSplit,
    epochs: usize,
    rng: &mut ChaCha8Rng,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochStats),
{
    if split.train.is_empty() {
        return Err(Error::contract("no training users"));
    }
    if split.num_items() != model.num_items() {
        return Err(Error::Config(format!(
            "model has {} items but the split has {}",
            model.num_items(),
            split.num_items()
        )));
    }
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val = None;
    let mut curve = Vec::with_capacity(epochs);

    for epoch in 1..=epochs {
        let started = Instant::now();
        let train_loss = run_epoch(&mut model, split, epoch, rng)?;
        let val = validation_score(&model, split)?;
        let stats = EpochStats {
            epoch,
            train_loss,
            val_ndcg100: val,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        curve.push(stats);

        let improved = match (val, best_val) {
            (Some(v), Some(b)) => v > b,
            (Some(_), None) => true,
            (None, _) => true,
        };
        if improved {
            best.store_mut().copy_values_from(model.store())?;
            best_epoch = epoch;
            best_val = val;
        }
    }

    Ok(TrainOutcome {
        model: best,
        curve,
        best_epoch,
        best_val_ndcg100: best_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{cyclic_sequences, split_in_order};

    fn tiny_split() -> DatasetSplit {
        let seqs = cyclic_sequences(8, 30, 8, 1);
        split_in_order(seqs, 8, (20, 5, 5), 0.8).unwrap()
    }

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            latent_dim: 4,
            item_embedding_dim: 4,
            gru_hidden: 6,
            encoder_widths: vec![6, 4],
            decoder_widths: vec![4, 6],
            rvae_embedding_dim: 4,
            rvae_encoder_widths: vec![6, 4],
            epochs: 2,
            batch_size: 8,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn zero_epochs_return_initial_parameters() {
        let split = tiny_split();
        let config = ModelConfig {
            epochs: 0,
            ..tiny_config()
        };
        for kind in [ModelKind::Svae, ModelKind::Mvae, ModelKind::Rvae] {
            let out = train(kind, &split, &config, |_| {}).unwrap();
            let fresh = Model::init(
                kind,
                &config,
                &split,
                &mut ChaCha8Rng::seed_from_u64(config.seed),
            )
            .unwrap();
            assert!(out.curve.is_empty());
            assert_eq!(out.best_epoch, 0);
            for id in fresh.store().ids() {
                assert_eq!(
                    fresh.store().get(id).data(),
                    out.model.store().get(id).data()
                );
            }
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let split = tiny_split();
        for kind in [ModelKind::Svae, ModelKind::Mvae, ModelKind::Rvae] {
            let a = train(kind, &split, &tiny_config(), |_| {}).unwrap();
            let b = train(kind, &split, &tiny_config(), |_| {}).unwrap();
            let bits = |o: &TrainOutcome| -> Vec<(u64, Option<u64>)> {
                o.curve
                    .iter()
                    .map(|s| (s.train_loss.to_bits(), s.val_ndcg100.map(f64::to_bits)))
                    .collect()
            };
            assert_eq!(bits(&a), bits(&b), "{kind}");
            assert_eq!(a.curve.len(), 2);
        }
    }

    #[test]
    fn best_epoch_matches_curve() {
        let split = tiny_split();
        let config = ModelConfig {
            epochs: 3,
            ..tiny_config()
        };
        let out = train(ModelKind::Mvae, &split, &config, |_| {}).unwrap();
        let best = out
            .curve
            .iter()
            .map(|s| s.val_ndcg100.unwrap())
            .fold(f64::MIN, f64::max);
        assert_eq!(out.best_val_ndcg100, Some(best));
        assert_eq!(validation_score(&out.model, &split).unwrap(), Some(best));
    }

    #[test]
    fn divergence_names_epoch_and_batch() {
        let split = tiny_split();
        let config = tiny_config();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Model::init(ModelKind::Mvae, &config, &split, &mut rng).unwrap();
        let id = model.store().ids().next().unwrap();
        model.store_mut().get_mut(id).data_mut()[0] = f64::NAN;
        match train_model(model, &split, 2, &mut rng, |_| {}) {
            Err(Error::Divergence { epoch, batch, loss }) => {
                assert_eq!((epoch, batch), (1, 1));
                assert!(loss.is_nan());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
