use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::Interaction;
use crate::error::{Error, Result};

/// A user's time-ordered consumption history over dense item indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSequence {
    pub user_index: usize,
    pub items: Vec<usize>,
}

impl UserSequence {
    pub fn new(user_index: usize, items: Vec<usize>) -> Self {
        UserSequence { user_index, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Bijection between raw item ids and dense indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ItemVocabulary {
    raw: Vec<String>,
    index: HashMap<String, usize>,
}

impl ItemVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from raw ids in index order; ids must be distinct.
    pub fn from_raw_ids(ids: Vec<String>) -> Result<Self> {
        let mut v = ItemVocabulary::new();
        for id in ids {
            if v.index.contains_key(&id) {
                return Err(Error::contract(format!("duplicate item id {id:?}")));
            }
            v.insert(id);
        }
        Ok(v)
    }

    /// Returns the index of `raw`, assigning the next free one if unseen.
    pub fn insert(&mut self, raw: String) -> usize {
        if let Some(&i) = self.index.get(&raw) {
            return i;
        }
        let i = self.raw.len();
        self.index.insert(raw.clone(), i);
        self.raw.push(raw);
        i
    }

    pub fn index_of(&self, raw: &str) -> Option<usize> {
        self.index.get(raw).copied()
    }

    pub fn raw_id(&self, index: usize) -> Option<&str> {
        self.raw.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.raw.iter().enumerate().map(|(i, s)| (i, s.as_str()))
    }
}

/// Groups implicit events into per-user sequences.
///
/// Events are ordered by `(timestamp, item, user)`; item and user indices are
/// assigned by first appearance in that order, so the result does not depend on
/// the row order of the source file. Within a user, equal timestamps are broken
/// by raw item id and repeated items keep only their first occurrence.
pub fn build_sequences(events: &[Interaction]) -> (Vec<UserSequence>, ItemVocabulary) {
    let mut ordered: Vec<&Interaction> = events.iter().collect();
    ordered.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.item.cmp(&b.item))
            .then_with(|| a.user.cmp(&b.user))
    });

    let mut vocab = ItemVocabulary::new();
    let mut users: HashMap<&str, usize> = HashMap::new();
    let mut histories: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<HashSet<usize>> = Vec::new();

    for e in ordered {
        let item = vocab.insert(e.item.clone());
        let next = users.len();
        let u = *users.entry(e.user.as_str()).or_insert(next);
        if u == histories.len() {
            histories.push(Vec::new());
            seen.push(HashSet::new());
        }
        if seen[u].insert(item) {
            histories[u].push(item);
        }
    }

    let sequences = histories
        .into_iter()
        .enumerate()
        .map(|(u, items)| UserSequence::new(u, items))
        .collect();
    (sequences, vocab)
}

pub fn filter_min_history(sequences: Vec<UserSequence>, min_len: usize) -> Vec<UserSequence> {
    sequences
        .into_iter()
        .filter(|s| s.len() >= min_len)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(user: &str, item: &str, t: u64) -> Interaction {
        Interaction {
            user: user.into(),
            item: item.into(),
            timestamp: t,
        }
    }

    fn raw(vocab: &ItemVocabulary, seq: &UserSequence) -> Vec<String> {
        seq.items
            .iter()
            .map(|&i| vocab.raw_id(i).unwrap().to_string())
            .collect()
    }

    #[test]
    fn sorts_by_time() {
        let (seqs, vocab) = build_sequences(&[ev("A", "i2", 5), ev("A", "i1", 3)]);
        assert_eq!(raw(&vocab, &seqs[0]), vec!["i1", "i2"]);
    }

    #[test]
    fn timestamp_ties_break_on_item_id() {
        let (seqs, vocab) = build_sequences(&[ev("A", "z", 1), ev("A", "b", 1), ev("A", "m", 0)]);
        assert_eq!(raw(&vocab, &seqs[0]), vec!["m", "b", "z"]);
    }

    #[test]
    fn duplicates_keep_first_occurrence() {
        let (seqs, vocab) = build_sequences(&[
            ev("A", "x", 9),
            ev("A", "y", 2),
            ev("A", "x", 1),
            ev("A", "z", 5),
        ]);
        assert_eq!(raw(&vocab, &seqs[0]), vec!["x", "y", "z"]);
    }

    #[test]
    fn single_event_single_sequence() {
        let (seqs, vocab) = build_sequences(&[ev("A", "x", 9)]);
        assert_eq!(seqs, vec![UserSequence::new(0, vec![0])]);
        assert_eq!(vocab.len(), 1);
        assert!(filter_min_history(seqs, 5).is_empty());
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut events = vec![
            ev("A", "x", 3),
            ev("B", "y", 1),
            ev("A", "y", 2),
            ev("B", "z", 7),
        ];
        let first = build_sequences(&events);
        events.reverse();
        assert_eq!(first, build_sequences(&events));
    }

    #[test]
    fn filter_boundary_is_inclusive() {
        let seqs = vec![
            UserSequence::new(0, vec![0, 1, 2, 3]),
            UserSequence::new(1, vec![0, 1, 2, 3, 4]),
        ];
        let kept = filter_min_history(seqs, 5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].user_index, 1);
        assert!(filter_min_history(Vec::new(), 5).is_empty());
    }

    #[test]
    fn vocabulary_round_trips() {
        let v = ItemVocabulary::from_raw_ids(vec!["a".into(), "b".into()]).unwrap();
        for (i, id) in v.iter() {
            assert_eq!(v.index_of(id), Some(i));
        }
        assert!(ItemVocabulary::from_raw_ids(vec!["a".into(), "a".into()]).is_err());
    }
}
