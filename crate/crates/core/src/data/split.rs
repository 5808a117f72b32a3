use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ItemVocabulary, UserSequence};
use crate::error::{Error, Result};

/// A validation or test user: the conditioning prefix and the items to recover.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldOutUser {
    pub user_index: usize,
    pub fold_in: Vec<usize>,
    /// Remaining items in time order; scored as a set.
    pub fold_out: Vec<usize>,
}

impl HeldOutUser {
    pub fn from_sequence(seq: &UserSequence, ratio: f64) -> Result<Self> {
        let (fold_in, fold_out) = fold_split(&seq.items, ratio)?;
        Ok(HeldOutUser {
            user_index: seq.user_index,
            fold_in: fold_in.to_vec(),
            fold_out: fold_out.to_vec(),
        })
    }

    pub fn relevant(&self) -> HashSet<usize> {
        self.fold_out.iter().copied().collect()
    }

    pub fn full_sequence(&self) -> UserSequence {
        let mut items = self.fold_in.clone();
        items.extend_from_slice(&self.fold_out);
        UserSequence::new(self.user_index, items)
    }
}

/// Users partitioned three ways, before temporal splitting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserPartition {
    pub train: Vec<UserSequence>,
    pub validation: Vec<UserSequence>,
    pub test: Vec<UserSequence>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<UserSequence>,
    pub validation: Vec<HeldOutUser>,
    pub test: Vec<HeldOutUser>,
    pub vocabulary: ItemVocabulary,
}

impl DatasetSplit {
    pub fn from_partition(
        partition: UserPartition,
        vocabulary: ItemVocabulary,
        fold_ratio: f64,
    ) -> Result<Self> {
        let fold = |seqs: &[UserSequence]| -> Result<Vec<HeldOutUser>> {
            seqs.iter()
                .map(|s| HeldOutUser::from_sequence(s, fold_ratio))
                .collect()
        };
        let split = DatasetSplit {
            validation: fold(&partition.validation)?,
            test: fold(&partition.test)?,
            train: partition.train,
            vocabulary,
        };
        split.validate()?;
        Ok(split)
    }

    pub fn num_items(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn held_out(&self, which: SplitKind) -> &[HeldOutUser] {
        match which {
            SplitKind::Validation => &self.validation,
            SplitKind::Test => &self.test,
        }
    }

    /// Checks disjoint user sets, catalog bounds, and nonempty folds.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_items();
        let mut users = HashSet::new();
        let train = self
            .train
            .iter()
            .map(|s| (s.user_index, s.items.as_slice(), true));
        let held = self
            .validation
            .iter()
            .chain(&self.test)
            .map(|h| (h.user_index, h.fold_in.as_slice(), false));
        for (u, items, _) in train.chain(held) {
            if !users.insert(u) {
                return Err(Error::contract(format!(
                    "user {u} appears in more than one split"
                )));
            }
            if let Some(&bad) = items.iter().find(|&&i| i >= n) {
                return Err(Error::Index {
                    op: "dataset split",
                    index: bad,
                    size: n,
                });
            }
        }
        for h in self.validation.iter().chain(&self.test) {
            if h.fold_in.is_empty() || h.fold_out.is_empty() {
                return Err(Error::contract(format!(
                    "user {} has an empty fold",
                    h.user_index
                )));
            }
            if let Some(&bad) = h.fold_out.iter().find(|&&i| i >= n) {
                return Err(Error::Index {
                    op: "dataset split",
                    index: bad,
                    size: n,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Validation,
    Test,
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation" | "val" => Ok(SplitKind::Validation),
            "test" => Ok(SplitKind::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Shuffles users with `seed` and cuts them into train/validation/test.
///
/// Validation and test sizes are `round(fraction * users)`; training takes the rest.
pub fn split_users(
    sequences: Vec<UserSequence>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<UserPartition> {
    let (tr, va, te) = fractions;
    let valid = [tr, va, te].iter().all(|f| f.is_finite() && *f > 0.0);
    if !valid || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let mut users = sequences;
    users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = users.len();
    let n_val = ((va * n as f64).round() as usize).min(n);
    let n_test = ((te * n as f64).round() as usize).min(n - n_val);
    let test = users.split_off(n - n_test);
    let validation = users.split_off(n - n_test - n_val);
    Ok(UserPartition {
        train: users,
        validation,
        test,
    })
}

/// Splits a time-ordered history into the first `floor(ratio * len)` items (clamped to
/// `1..=len-1`) and the rest.
pub fn fold_split(items: &[usize], ratio: f64) -> Result<(&[usize], &[usize])> {
    let len = items.len();
    if len < 2 {
        return Err(Error::contract(format!(
            "fold split needs at least 2 items, got {len}"
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::contract(format!("fold ratio {ratio} not in (0, 1)")));
    }
    // The epsilon keeps e.g. 0.8 * 5 from landing a hair below 4.
    let cut = ((ratio * len as f64) + 1e-9).floor() as usize;
    let cut = cut.clamp(1, len - 1);
    Ok(items.split_at(cut))
}
