mod common;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_ndcg, brute_precision, brute_recall};
use seqvae::data::HeldOutUser;
use seqvae::eval::{
    evaluate, ndcg_at_n, precision_at_n, recall_at_n, EvalOptions, IdcgMode, Metric, Recommender,
};
use seqvae::Result;

struct Instance {
    ranked: Vec<usize>,
    relevant: Vec<usize>,
    n: usize,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let catalog = rng.random_range(1..=200);
    let mut items: Vec<usize> = (0..catalog).collect();
    items.shuffle(rng);
    let list_len = rng.random_range(0..=catalog);
    let ranked = items[..list_len].to_vec();
    items.shuffle(rng);
    let relevant = items[..rng.random_range(1..=catalog)].to_vec();
    let n = match rng.random_range(0..4) {
        0 => 10,
        1 => 100,
        _ => rng.random_range(1..=catalog + 5),
    };
    Instance {
        ranked,
        relevant,
        n,
    }
}

#[test]
fn metrics_equal_the_brute_force_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let inst = random_instance(&mut rng);
        let set: HashSet<usize> = inst.relevant.iter().copied().collect();
        let ndcg = ndcg_at_n(&inst.ranked, &set, inst.n, IdcgMode::Full).unwrap();
        let precision = precision_at_n(&inst.ranked, &set, inst.n).unwrap();
        let recall = recall_at_n(&inst.ranked, &set, inst.n).unwrap();
        assert_eq!(
            ndcg.to_bits(),
            brute_ndcg(&inst.ranked, &inst.relevant, inst.n).to_bits(),
            "case {case}"
        );
        assert_eq!(
            precision.to_bits(),
            brute_precision(&inst.ranked, &inst.relevant, inst.n).to_bits(),
            "case {case}"
        );
        assert_eq!(
            recall.to_bits(),
            brute_recall(&inst.ranked, &inst.relevant, inst.n).to_bits(),
            "case {case}"
        );
    }
}

#[test]
fn hand_derived_ndcg() {
    // hits at positions 1 and 3, two relevant items: 1.5 / (1 + 1/log2 3)
    let ranked = [7, 3, 9];
    let relevant = HashSet::from([7, 9]);
    let v = ndcg_at_n(&ranked, &relevant, 3, IdcgMode::Full).unwrap();
    assert!((v - 0.91972).abs() < 1e-5, "{v}");
    assert!((brute_ndcg(&ranked, &[7, 9], 3) - 0.91972).abs() < 1e-5);
}

#[test]
fn moving_a_hit_up_never_lowers_ndcg() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let set: HashSet<usize> = inst.relevant.iter().copied().collect();
        let mut ranked = inst.ranked.clone();
        let hits: Vec<usize> = (1..ranked.len())
            .filter(|&p| set.contains(&ranked[p]))
            .collect();
        let Some(&p) = hits.first() else { continue };
        let before = ndcg_at_n(&ranked, &set, inst.n, IdcgMode::Full).unwrap();
        ranked.swap(p, p - 1);
        let after = ndcg_at_n(&ranked, &set, inst.n, IdcgMode::Full).unwrap();
        assert!(after >= before, "{after} < {before}");
    }
}

#[test]
fn order_below_the_cutoff_is_ignored() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        if inst.ranked.len() <= inst.n {
            continue;
        }
        let set: HashSet<usize> = inst.relevant.iter().copied().collect();
        let mut shuffled = inst.ranked.clone();
        shuffled[inst.n..].shuffle(&mut rng);
        for mode in [IdcgMode::Full, IdcgMode::Capped] {
            assert_eq!(
                ndcg_at_n(&inst.ranked, &set, inst.n, mode).unwrap(),
                ndcg_at_n(&shuffled, &set, inst.n, mode).unwrap()
            );
        }
        assert_eq!(
            recall_at_n(&inst.ranked, &set, inst.n).unwrap(),
            recall_at_n(&shuffled, &set, inst.n).unwrap()
        );
    }
}

/// Ranks the whole catalog in a per-user random order.
struct Shuffler {
    num_items: usize,
}

impl Recommender for Shuffler {
    fn name(&self) -> &str {
        "shuffle"
    }

    fn recommend(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(fold_in[0] as u64 * 7919 + fold_in.len() as u64);
        let mut items: Vec<usize> = (0..self.num_items)
            .filter(|i| !exclude.contains(i))
            .collect();
        items.shuffle(&mut rng);
        Ok(items)
    }
}

fn random_users(num_items: usize, users: usize, relevant: usize, seed: u64) -> Vec<HeldOutUser> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..users)
        .map(|u| {
            // a distinct one-item fold-in per user, so users can be told apart by it
            let mut others: Vec<usize> = (0..num_items).filter(|&i| i != u).collect();
            others.shuffle(&mut rng);
            HeldOutUser {
                user_index: u,
                fold_in: vec![u],
                fold_out: others[..relevant].to_vec(),
            }
        })
        .collect()
}

#[test]
fn random_ranking_recall_matches_its_expectation() {
    let users = random_users(1000, 200, 10, 11);
    let opts = EvalOptions {
        cutoffs: vec![100],
        ..EvalOptions::default()
    };
    let report = evaluate(&Shuffler { num_items: 1000 }, &users, &opts).unwrap();
    let recall = report.get(Metric::Recall, 100).unwrap();
    assert!((recall - 0.1).abs() < 0.03, "{recall}");
}

#[test]
fn evaluation_ignores_user_order() {
    let users = random_users(300, 150, 5, 12);
    let mut reversed = users.clone();
    reversed.reverse();
    let rec = Shuffler { num_items: 300 };
    let a = evaluate(&rec, &users, &EvalOptions::default()).unwrap();
    let b = evaluate(&rec, &reversed, &EvalOptions::default()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

/// Puts the fold-out first, in order.
struct Clairvoyant<'a> {
    users: &'a [HeldOutUser],
    num_items: usize,
}

impl Recommender for Clairvoyant<'_> {
    fn name(&self) -> &str {
        "oracle"
    }

    fn recommend(&self, fold_in: &[usize], exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        let user = self.users.iter().find(|u| u.fold_in == fold_in).unwrap();
        let mut out = user.fold_out.clone();
        out.extend(
            (0..self.num_items).filter(|i| !exclude.contains(i) && !user.fold_out.contains(i)),
        );
        Ok(out)
    }
}

#[test]
fn perfect_rankings_score_the_maximum() {
    let users = random_users(100, 40, 5, 13);
    let report = evaluate(
        &Clairvoyant {
            users: &users,
            num_items: 100,
        },
        &users,
        &EvalOptions::default(),
    )
    .unwrap();
    assert_eq!(report.get(Metric::Ndcg, 10), Some(1.0));
    assert_eq!(report.get(Metric::Ndcg, 100), Some(1.0));
    assert_eq!(report.get(Metric::Recall, 10), Some(1.0));
    assert_eq!(report.get(Metric::Precision, 10), Some(0.5));
}
