use std::collections::HashSet;

use super::Recommender;
use crate::data::UserSequence;
use crate::error::Result;

/// Recommends the globally most consumed training items.
#[derive(Clone, Debug, PartialEq)]
pub struct PopBaseline {
    counts: Vec<usize>,
    order: Vec<usize>,
}

impl PopBaseline {
    pub fn fit(train: &[UserSequence], num_items: usize) -> Self {
        let mut counts = vec![0usize; num_items];
        for s in train {
            for &i in &s.items {
                counts[i] += 1;
            }
        }
        Self::from_counts(&counts)
    }

    pub fn from_counts(counts: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        PopBaseline {
            counts: counts.to_vec(),
            order,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

impl Recommender for PopBaseline {
    fn name(&self) -> &str {
        "pop"
    }

    fn recommend(&self, _fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        Ok(self
            .order
            .iter()
            .copied()
            .filter(|i| !exclude.contains(i))
            .collect())
    }
}
