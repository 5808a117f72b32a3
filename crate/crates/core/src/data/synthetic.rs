//! Generators for toy datasets with known sequential structure.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetSplit, InteractionRecord, ItemVocabulary, UserPartition, UserSequence};
use crate::error::{Error, Result};

/// Walks `i -> i + 1 (mod num_items)` of the given length from uniform random starts.
pub fn cyclic_sequences(
    num_items: usize,
    num_users: usize,
    length: usize,
    seed: u64,
) -> Vec<UserSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_users)
        .map(|u| {
            let start = rng.random_range(0..num_items);
            UserSequence::new(u, (0..length).map(|t| (start + t) % num_items).collect())
        })
        .collect()
}

/// Sequences made of bursts: an anchor item `a` followed by `a+1 .. a+burst` in a random
/// order, then the next anchor `a + burst + 1`. Indices wrap modulo `num_items`. Each
/// user's length is drawn uniformly from `lengths`.
pub fn burst_sequences(
    num_items: usize,
    num_users: usize,
    lengths: RangeInclusive<usize>,
    burst: usize,
    seed: u64,
) -> Vec<UserSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_users)
        .map(|u| {
            let length = rng.random_range(lengths.clone());
            let mut anchor = rng.random_range(0..num_items);
            let mut items = Vec::with_capacity(length);
            while items.len() < length {
                items.push(anchor % num_items);
                let mut followers: Vec<usize> =
                    (1..=burst).map(|d| (anchor + d) % num_items).collect();
                followers.shuffle(&mut rng);
                items.extend(followers);
                anchor += burst + 1;
            }
            items.truncate(length);
            UserSequence::new(u, items)
        })
        .collect()
}

/// Vocabulary whose raw ids are the decimal item indices.
pub fn identity_vocabulary(num_items: usize) -> ItemVocabulary {
    ItemVocabulary::from_raw_ids((0..num_items).map(|i| i.to_string()).collect())
        .expect("distinct ids")
}

/// Assigns the first `counts.0` users to training, the next `counts.1` to validation and
/// the next `counts.2` to test.
pub fn split_in_order(
    sequences: Vec<UserSequence>,
    num_items: usize,
    counts: (usize, usize, usize),
    fold_ratio: f64,
) -> Result<DatasetSplit> {
    let (tr, va, te) = counts;
    if tr + va + te > sequences.len() {
        return Err(Error::contract(format!(
            "requested {} users, have {}",
            tr + va + te,
            sequences.len()
        )));
    }
    let mut rest = sequences;
    let mut test = rest.split_off(tr + va);
    test.truncate(te);
    let validation = rest.split_off(tr);
    let partition = UserPartition {
        train: rest,
        validation,
        test,
    };
    DatasetSplit::from_partition(partition, identity_vocabulary(num_items), fold_ratio)
}

/// Renders sequences as rating records (rating 5, one second apart) so they can be fed
/// through the ingestion pipeline.
pub fn to_ratings(sequences: &[UserSequence]) -> Vec<InteractionRecord> {
    let mut out = Vec::new();
    for s in sequences {
        for (t, &i) in s.items.iter().enumerate() {
            out.push(InteractionRecord {
                user: format!("u{}", s.user_index),
                item: i.to_string(),
                rating: 5.0,
                timestamp: 1_000_000 + t as u64,
            });
        }
    }
    out
}

pub fn ratings_csv(records: &[InteractionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.user, r.item, r.rating, r.timestamp
        ));
    }
    out
}
