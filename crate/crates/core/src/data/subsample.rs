//! History-length stratified user subsampling.
//!
//! Users are bucketed by sequence length and each bucket receives a share of the
//! target proportional to `1 / bucket size`, so short-history users (the crowded
//! buckets) are thinned while long-history users survive.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::UserSequence;
use crate::error::{Error, Result};

/// Inclusive upper bounds 8, 16, 32, ... up to the first bound covering `max_len`.
pub fn default_strata_edges(max_len: usize) -> Vec<usize> {
    let mut edges = vec![8];
    while *edges.last().unwrap() < max_len {
        let next = edges.last().unwrap() * 2;
        edges.push(next);
    }
    edges
}

/// Stratum of a history length: the first edge `>= len`, or one past the last edge.
pub fn stratum_of(len: usize, edges: &[usize]) -> usize {
    edges.partition_point(|&e| e < len)
}

/// Per-stratum sample sizes: inverse-size weights normalized to `target`, each capped at
/// its stratum size with the excess handed to the uncapped strata. Fractional shares are
/// resolved by largest remainder, ties to the lower stratum.
pub fn allocate_inverse(sizes: &[usize], target: usize) -> Result<Vec<usize>> {
    let population: usize = sizes.iter().sum();
    if target > population {
        return Err(Error::contract(format!(
            "subsample target {target} exceeds population {population}"
        )));
    }
    let mut quota = vec![0usize; sizes.len()];
    let mut open: Vec<usize> = (0..sizes.len()).filter(|&s| sizes[s] > 0).collect();
    let mut remaining = target;

    loop {
        if remaining == 0 || open.is_empty() {
            break;
        }
        let total_w: f64 = open.iter().map(|&s| 1.0 / sizes[s] as f64).sum();
        let share = |s: usize| remaining as f64 * (1.0 / sizes[s] as f64) / total_w;

        let full: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&s| share(s) >= sizes[s] as f64)
            .collect();
        if !full.is_empty() {
            for &s in &full {
                quota[s] = sizes[s];
                remaining -= sizes[s];
            }
            open.retain(|s| !full.contains(s));
            continue;
        }

        let mut given = 0;
        let mut fractions = Vec::with_capacity(open.len());
        for &s in &open {
            let q = share(s);
            let whole = q.floor() as usize;
            quota[s] = whole;
            given += whole;
            fractions.push((q - whole as f64, s));
        }
        fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, s) in fractions.iter().take(remaining - given) {
            quota[s] += 1;
        }
        break;
    }
    Ok(quota)
}

/// Draws `target` users without replacement, stratified by history length. Survivors keep
/// their input order.
pub fn stratified_subsample(
    sequences: Vec<UserSequence>,
    target: usize,
    edges: &[usize],
    seed: u64,
) -> Result<Vec<UserSequence>> {
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("strata edges must be strictly ascending"));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); edges.len() + 1];
    for (i, s) in sequences.iter().enumerate() {
        members[stratum_of(s.len(), edges)].push(i);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let quota = allocate_inverse(&sizes, target)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = HashSet::with_capacity(target);
    for (m, &q) in members.iter().zip(&quota) {
        if q == 0 {
            continue;
        }
        for pick in sample(&mut rng, m.len(), q) {
            keep.insert(m[pick]);
        }
    }
    Ok(sequences
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, s)| s)
        .collect())
}
