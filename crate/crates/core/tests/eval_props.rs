//! Ranking and metric invariants.

use std::collections::BTreeMap;

use lightgcn::eval::top_k_indices;
use lightgcn::{fairness_bins, ndcg_at_k, recall_precision_at_k, InteractionGraph, RankedList};
use proptest::prelude::*;

fn naive_top_k(scores: &[f64], exclude: &[usize], k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..scores.len()).filter(|i| !exclude.contains(i)).collect();
    all.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    all.truncate(k);
    all
}

proptest! {
    #[test]
    fn top_k_matches_full_sort(
        scores in proptest::collection::vec(-3i32..3, 1..40),
        exclude in proptest::collection::btree_set(0usize..40, 0..10),
        k in 0usize..45,
    ) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let exclude: Vec<usize> = exclude.into_iter().collect();
        prop_assert_eq!(top_k_indices(&scores, &exclude, k), naive_top_k(&scores, &exclude, k));
    }

    #[test]
    fn metrics_are_bounded(
        items in proptest::collection::vec(0usize..30, 0..20),
        test in proptest::collection::btree_set(0usize..30, 1..10),
        cutoff in 1usize..20,
    ) {
        let mut seen = std::collections::HashSet::new();
        let items: Vec<usize> = items.into_iter().filter(|i| seen.insert(*i)).take(cutoff).collect();
        let test: Vec<usize> = test.into_iter().collect();
        let list = RankedList { user: 0, items, cutoff };
        let (r, p) = recall_precision_at_k(&list, &test);
        let n = ndcg_at_k(&list, &test);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
    }

    #[test]
    fn perfect_list_has_unit_ndcg(test in proptest::collection::btree_set(0usize..50, 1..15), cutoff in 1usize..20) {
        let test: Vec<usize> = test.into_iter().collect();
        let items: Vec<usize> = test.iter().copied().take(cutoff).collect();
        let list = RankedList { user: 0, items, cutoff };
        prop_assert!((ndcg_at_k(&list, &test) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fairness_bins_partition_users(
        degrees in proptest::collection::vec(1usize..8, 4..40),
        bins in 2usize..6,
    ) {
        prop_assume!(degrees.len() >= bins);
        let nu = degrees.len();
        let mut pairs = Vec::new();
        for (u, &d) in degrees.iter().enumerate() {
            for i in 0..d {
                pairs.push((u, i));
            }
        }
        let g = InteractionGraph::from_pairs(nu, 8, &pairs);
        let metric: BTreeMap<usize, f64> = (0..nu).map(|u| (u, (u % 5) as f64 / 4.0)).collect();
        let table = fairness_bins(&metric, &g, bins).unwrap();
        prop_assert_eq!(table.bins.len(), bins);
        prop_assert_eq!(table.bins.iter().map(|b| b.users).sum::<usize>(), nu);
        let (lo, hi) = (nu / bins, nu.div_ceil(bins));
        for b in &table.bins {
            prop_assert!(b.users >= lo && b.users <= hi);
            prop_assert!(b.min_interactions <= b.max_interactions);
        }
        for w in table.bins.windows(2) {
            prop_assert!(w[0].max_interactions <= w[1].min_interactions);
        }
        let means: Vec<f64> = table.bins.iter().map(|b| b.mean_metric).collect();
        let max = means.iter().copied().fold(f64::MIN, f64::max);
        let min = means.iter().copied().fold(f64::MAX, f64::min);
        prop_assert!((table.gap - (max - min)).abs() < 1e-12);
        prop_assert!(table.std >= 0.0 && table.std <= table.gap + 1e-12);
    }
}

#[test]
fn fewer_users_than_bins() {
    let g = InteractionGraph::from_pairs(2, 2, &[(0, 0), (1, 1)]);
    let metric: BTreeMap<usize, f64> = [(0, 1.0), (1, 0.5)].into();
    assert!(matches!(fairness_bins(&metric, &g, 4), Err(lightgcn::Error::TooFewUsers { .. })));
}
