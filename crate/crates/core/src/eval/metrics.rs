use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalizer for NDCG.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdcgMode {
    /// Ideal gain summed over all `|R|` relevant items, regardless of `n`.
    #[default]
    Full,
    /// Ideal gain summed over `min(|R|, n)` items.
    Capped,
}

fn discount(position: usize) -> f64 {
    // position is 1-based
    1.0 / ((position + 1) as f64).log2()
}

fn require_relevant(relevant: &HashSet<usize>, what: &str) -> Result<()> {
    if relevant.is_empty() {
        return Err(Error::contract(format!(
            "{what} needs a nonempty relevant set"
        )));
    }
    Ok(())
}

fn require_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::contract("cutoff n must be at least 1"));
    }
    Ok(())
}

pub fn hits_at_n(ranked: &[usize], relevant: &HashSet<usize>, n: usize) -> usize {
    ranked
        .iter()
        .take(n)
        .filter(|i| relevant.contains(i))
        .count()
}

pub fn dcg_at_n(ranked: &[usize], relevant: &HashSet<usize>, n: usize) -> f64 {
    let mut dcg = 0.0;
    for (k, item) in ranked.iter().take(n).enumerate() {
        if relevant.contains(item) {
            dcg += discount(k + 1);
        }
    }
    dcg
}

pub fn idcg(relevant_count: usize, n: usize, mode: IdcgMode) -> f64 {
    let terms = match mode {
        IdcgMode::Full => relevant_count,
        IdcgMode::Capped => relevant_count.min(n),
    };
    let mut total = 0.0;
    for k in 1..=terms {
        total += discount(k);
    }
    total
}

pub fn ndcg_at_n(
    ranked: &[usize],
    relevant: &HashSet<usize>,
    n: usize,
    mode: IdcgMode,
) -> Result<f64> {
    require_relevant(relevant, "NDCG")?;
    require_n(n)?;
    Ok(dcg_at_n(ranked, relevant, n) / idcg(relevant.len(), n, mode))
}

/// Hits in the top `n` over `n`; a list shorter than `n` counts its missing slots as misses.
pub fn precision_at_n(ranked: &[usize], relevant: &HashSet<usize>, n: usize) -> Result<f64> {
    require_n(n)?;
    Ok(hits_at_n(ranked, relevant, n) as f64 / n as f64)
}

pub fn recall_at_n(ranked: &[usize], relevant: &HashSet<usize>, n: usize) -> Result<f64> {
    require_relevant(relevant, "recall")?;
    require_n(n)?;
    Ok(hits_at_n(ranked, relevant, n) as f64 / relevant.len() as f64)
}
