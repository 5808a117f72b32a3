//! Rating logs to user sequences, user-level splits, and temporal fold splits.

mod ingest;
pub mod io;
mod sequences;
mod split;
pub mod subsample;
pub mod synthetic;

pub use ingest::{binarize, ingest, parse_ratings, Interaction, InteractionRecord, RatingsFormat};
pub use sequences::{build_sequences, filter_min_history, ItemVocabulary, UserSequence};
pub use split::{fold_split, split_users, DatasetSplit, HeldOutUser, SplitKind, UserPartition};
pub use subsample::stratified_subsample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Options for turning a ratings log into a [`DatasetSplit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub format: RatingsFormat,
    /// Ratings strictly above this count as consumption.
    pub threshold: f64,
    pub min_history: usize,
    pub fractions: (f64, f64, f64),
    pub fold_ratio: f64,
    /// Target user count for stratified subsampling; `None` keeps everyone.
    pub subsample_users: Option<usize>,
    /// Inclusive upper bounds of the history-length strata; doubling from 8 when unset.
    pub strata_edges: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            format: RatingsFormat::default(),
            threshold: 3.0,
            min_history: 5,
            fractions: (0.8, 0.1, 0.1),
            fold_ratio: 0.8,
            subsample_users: None,
            strata_edges: None,
            seed: 0,
        }
    }
}

/// binarize → build sequences → length filter → optional subsample → user split → fold split.
pub fn prepare(records: &[InteractionRecord], config: &PipelineConfig) -> Result<DatasetSplit> {
    let implicit = binarize(records, config.threshold);
    if implicit.is_empty() {
        return Err(Error::contract("no interactions after binarization"));
    }
    let (sequences, vocabulary) = build_sequences(&implicit);
    let mut sequences = filter_min_history(sequences, config.min_history);
    if sequences.is_empty() {
        return Err(Error::contract(format!(
            "no users with at least {} items",
            config.min_history
        )));
    }
    if let Some(target) = config.subsample_users {
        let edges = match &config.strata_edges {
            Some(e) => e.clone(),
            None => {
                let max_len = sequences.iter().map(UserSequence::len).max().unwrap_or(0);
                subsample::default_strata_edges(max_len)
            }
        };
        sequences = stratified_subsample(sequences, target, &edges, config.seed)?;
    }
    let partition = split_users(sequences, config.fractions, config.seed)?;
    DatasetSplit::from_partition(partition, vocabulary, config.fold_ratio)
}
