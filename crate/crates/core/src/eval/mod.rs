//! Ranking metrics, the popularity baseline, and the fold-in/fold-out evaluation driver.

pub mod metrics;
mod pop;

pub use metrics::{ndcg_at_n, precision_at_n, recall_at_n, IdcgMode};
pub use pop::PopBaseline;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::HeldOutUser;
use crate::error::{Error, Result};

/// Anything that turns a fold-in history into a ranked item list.
pub trait Recommender: Sync {
    fn name(&self) -> &str;

    /// Items ranked best-first, with every item in `exclude` omitted.
    fn recommend(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>>;
}

/// Orders items by descending score, lower index first on ties, dropping `exclude`.
pub fn rank_by_scores(scores: &[f64], exclude: &HashSet<usize>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|i| !exclude.contains(i)).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Ndcg,
    Precision,
    Recall,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Ndcg, Metric::Precision, Metric::Recall];

    pub fn key(self, n: usize) -> String {
        let name = match self {
            Metric::Ndcg => "NDCG",
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
        };
        format!("{name}@{n}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserScores {
    pub user_index: usize,
    pub fold_in_len: usize,
    pub metrics: BTreeMap<String, f64>,
}

/// Mean metrics over a held-out user set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub config_digest: String,
    pub metrics: BTreeMap<String, f64>,
    pub users: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_user: Option<Vec<UserScores>>,
}

impl EvalReport {
    pub fn get(&self, metric: Metric, n: usize) -> Option<f64> {
        self.metrics.get(&metric.key(n)).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub cutoffs: Vec<usize>,
    pub idcg: IdcgMode,
    pub keep_per_user: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cutoffs: vec![10, 100],
            idcg: IdcgMode::Full,
            keep_per_user: false,
        }
    }
}

fn score_user(rec: &dyn Recommender, user: &HeldOutUser, opts: &EvalOptions) -> Result<UserScores> {
    if user.fold_out.is_empty() {
        return Err(Error::contract(format!(
            "user {} has an empty fold-out",
            user.user_index
        )));
    }
    if user.fold_in.is_empty() {
        return Err(Error::contract(format!(
            "user {} has an empty fold-in",
            user.user_index
        )));
    }
    let exclude: HashSet<usize> = user.fold_in.iter().copied().collect();
    let relevant = user.relevant();
    let ranked = rec.recommend(&user.fold_in, &exclude)?;
    let mut metrics = BTreeMap::new();
    for &n in &opts.cutoffs {
        metrics.insert(
            Metric::Ndcg.key(n),
            ndcg_at_n(&ranked, &relevant, n, opts.idcg)?,
        );
        metrics.insert(
            Metric::Precision.key(n),
            precision_at_n(&ranked, &relevant, n)?,
        );
        metrics.insert(Metric::Recall.key(n), recall_at_n(&ranked, &relevant, n)?);
    }
    Ok(UserScores {
        user_index: user.user_index,
        fold_in_len: user.fold_in.len(),
        metrics,
    })
}

/// Scores every user in parallel, then averages in ascending user-index order so the
/// result does not depend on the order `users` arrive in.
pub fn evaluate(
    rec: &dyn Recommender,
    users: &[HeldOutUser],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut scores = users
        .par_iter()
        .map(|u| score_user(rec, u, opts))
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by_key(|s| s.user_index);

    let mut metrics = BTreeMap::new();
    for &n in &opts.cutoffs {
        for m in Metric::ALL {
            let key = m.key(n);
            let total = scores.iter().fold(0.0, |acc, s| acc + s.metrics[&key]);
            let mean = if scores.is_empty() {
                0.0
            } else {
                total / scores.len() as f64
            };
            metrics.insert(key, mean);
        }
    }
    Ok(EvalReport {
        model: rec.name().to_string(),
        config_digest: String::new(),
        metrics,
        users: scores.len(),
        per_user: opts.keep_per_user.then_some(scores),
    })
}

/// Fold-in length buckets: [1, 10], (10, 20], (20, 40], (40, 80], (80, ∞).
pub const HISTORY_BUCKETS: [(usize, Option<usize>); 5] = [
    (1, Some(10)),
    (11, Some(20)),
    (21, Some(40)),
    (41, Some(80)),
    (81, None),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BucketRow {
    pub min_len: usize,
    pub max_len: Option<usize>,
    pub users: usize,
    /// `None` when the bucket is empty.
    pub mean: Option<f64>,
}

/// Mean of `key` per fold-in length bucket; needs a report built with `keep_per_user`.
pub fn by_history_length(report: &EvalReport, key: &str) -> Result<Vec<BucketRow>> {
    let per_user = report
        .per_user
        .as_ref()
        .ok_or_else(|| Error::contract("report has no per-user scores"))?;
    Ok(HISTORY_BUCKETS
        .iter()
        .map(|&(lo, hi)| {
            let inside: Vec<f64> = per_user
                .iter()
                .filter(|u| u.fold_in_len >= lo && hi.is_none_or(|h| u.fold_in_len <= h))
                .map(|u| u.metrics.get(key).copied().unwrap_or(0.0))
                .collect();
            BucketRow {
                min_len: lo,
                max_len: hi,
                users: inside.len(),
                mean: (!inside.is_empty())
                    .then(|| inside.iter().fold(0.0, |a, b| a + b) / inside.len() as f64),
            }
        })
        .collect())
}

pub fn buckets_csv(rows: &[BucketRow], key: &str) -> String {
    let mut out = format!("min_len,max_len,users,{key}\n");
    for r in rows {
        let hi = r
            .max_len
            .map(|h| h.to_string())
            .unwrap_or_else(|| "inf".into());
        let mean = r.mean.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.min_len, hi, r.users, mean));
    }
    out
}
