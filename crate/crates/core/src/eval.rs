//! Top-K retrieval and ranking metrics: Recall@K, Precision@K, NDCG@K, intra-list
//! distance and degree-binned fairness.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::model::EmbeddingState;

pub const DEFAULT_CUTOFF: usize = 20;
pub const DEFAULT_BINS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub user: usize,
    /// Descending score, ties by ascending item id.
    pub items: Vec<usize>,
    pub cutoff: usize,
}

impl RankedList {
    /// Fewer candidates than the cutoff were available.
    pub fn is_short(&self) -> bool {
        self.items.len() < self.cutoff
    }

    pub fn prefix(&self, cutoff: usize) -> RankedList {
        RankedList {
            user: self.user,
            items: self.items[..cutoff.min(self.items.len())].to_vec(),
            cutoff,
        }
    }
}

fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Indices of the `k` best scores, skipping `exclude` (sorted ascending).
pub fn top_k_indices(scores: &[f64], exclude: &[usize], k: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..scores.len())
        .filter(|i| exclude.binary_search(i).is_err())
        .collect();
    if k == 0 {
        return Vec::new();
    }
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    candidates
}

/// The `cutoff` highest-scoring items for `u`, excluding its train items.
pub fn top_k(state: &EmbeddingState, g: &InteractionGraph, u: usize, cutoff: usize) -> Result<RankedList> {
    let scores = state.score_all(u)?;
    let items = top_k_indices(scores.as_slice().expect("contiguous"), g.items_of(u), cutoff);
    let list = RankedList { user: u, items, cutoff };
    if list.is_short() {
        log::debug!("user {u}: only {} candidates for cutoff {cutoff}", list.items.len());
    }
    Ok(list)
}

fn hits<'a>(list: &'a RankedList, test_items: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
    list.items
        .iter()
        .enumerate()
        .filter(|(_, i)| test_items.contains(i))
        .map(|(r, _)| r)
}

/// `(|hits| / |test|, |hits| / cutoff)`.
pub fn recall_precision_at_k(list: &RankedList, test_items: &[usize]) -> (f64, f64) {
    if test_items.is_empty() || list.cutoff == 0 {
        return (0.0, 0.0);
    }
    let n = hits(list, test_items).count() as f64;
    (n / test_items.len() as f64, n / list.cutoff as f64)
}

/// Binary-relevance NDCG with a `1 / log2(rank + 1)` discount.
pub fn ndcg_at_k(list: &RankedList, test_items: &[usize]) -> f64 {
    let dcg: f64 = hits(list, test_items).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
    let ideal: f64 = (0..test_items.len().min(list.cutoff))
        .map(|r| 1.0 / ((r + 2) as f64).log2())
        .sum();
    if ideal > 0.0 {
        dcg / ideal
    } else {
        0.0
    }
}

/// Mean pairwise cosine distance among the listed items. `None` for lists shorter than two
/// or when every pair involves a zero-norm embedding.
pub fn ild(list: &RankedList, item_embeddings: ArrayView2<'_, f64>) -> Option<f64> {
    let rows: Vec<_> = list.items.iter().map(|&i| item_embeddings.row(i)).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.dot(r).sqrt()).collect();
    let (mut total, mut pairs, mut skipped) = (0.0, 0usize, 0usize);
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            if norms[a] == 0.0 || norms[b] == 0.0 {
                skipped += 1;
                continue;
            }
            let cos = rows[a].dot(&rows[b]) / (norms[a] * norms[b]);
            total += 1.0 - cos.clamp(-1.0, 1.0);
            pairs += 1;
        }
    }
    if skipped > 0 {
        log::warn!("user {}: skipped {skipped} item pairs with zero-norm embeddings", list.user);
    }
    (pairs > 0).then(|| total / pairs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessBin {
    /// Smallest and largest train-interaction count in the bin.
    pub min_interactions: usize,
    pub max_interactions: usize,
    pub users: usize,
    pub mean_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessTable {
    pub bins: Vec<FairnessBin>,
    /// max - min of the bin means.
    pub gap: f64,
    /// Population standard deviation of the bin means.
    pub std: f64,
}

/// Splits users into `num_bins` groups of (nearly) equal size after sorting by train degree.
///
/// Bin sizes always differ by at most one. A boundary falling inside a run of users with
/// equal degree is moved to the edge of that run when the size rule still holds.
pub fn fairness_bins(per_user: &BTreeMap<usize, f64>, g: &InteractionGraph, num_bins: usize) -> Result<FairnessTable> {
    if num_bins < 2 {
        return Err(Error::InvalidConfig("fairness needs at least 2 bins".into()));
    }
    let n = per_user.len();
    if n < num_bins {
        return Err(Error::TooFewUsers { users: n, bins: num_bins });
    }
    let mut users: Vec<(usize, usize, f64)> = Vec::with_capacity(n);
    for (&u, &m) in per_user {
        if u >= g.num_users() {
            return Err(Error::OutOfRange { kind: "user", id: u, count: g.num_users() });
        }
        users.push((g.user_degree(u), u, m));
    }
    users.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let (small, large) = (n / num_bins, n.div_ceil(num_bins));
    let mut cuts: Vec<usize> = (0..=num_bins).map(|b| b * n / num_bins).collect();
    for b in 1..num_bins {
        let cut = cuts[b];
        if users[cut - 1].0 != users[cut].0 {
            continue;
        }
        let degree = users[cut].0;
        let run_start = users[..cut].iter().rposition(|x| x.0 != degree).map_or(0, |p| p + 1);
        let run_end = users[cut..].iter().position(|x| x.0 != degree).map_or(n, |p| cut + p);
        let mut options = [run_start, run_end];
        options.sort_by_key(|&c| c.abs_diff(cut));
        for c in options {
            let fits = |lo: usize, hi: usize| hi > lo && (small..=large).contains(&(hi - lo));
            if fits(cuts[b - 1], c) && fits(c, cuts[b + 1]) {
                cuts[b] = c;
                break;
            }
        }
    }

    let bins: Vec<FairnessBin> = cuts
        .windows(2)
        .map(|w| {
            let slice = &users[w[0]..w[1]];
            FairnessBin {
                min_interactions: slice.first().map_or(0, |x| x.0),
                max_interactions: slice.last().map_or(0, |x| x.0),
                users: slice.len(),
                mean_metric: slice.iter().map(|x| x.2).sum::<f64>() / slice.len() as f64,
            }
        })
        .collect();
    let means: Vec<f64> = bins.iter().map(|b| b.mean_metric).collect();
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let std = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / means.len() as f64).sqrt();
    Ok(FairnessTable { bins, gap: max - min, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub cutoff: usize,
    /// Users with at least one test item.
    pub users: usize,
    pub recall: f64,
    pub precision: f64,
    pub ndcg: f64,
    /// Mean over users whose list admits an intra-list distance.
    pub ild: f64,
    /// Per-bin NDCG at this cutoff; absent when there are fewer users than bins.
    pub fairness: Option<FairnessTable>,
}

/// Per-user values behind a [`MetricsReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    pub recall: f64,
    pub precision: f64,
    pub ndcg: f64,
    pub ild: Option<f64>,
}

/// Per-user metrics at every cutoff, one `Vec` per cutoff in input order. Users without
/// test items are skipped.
pub fn evaluate_users(
    state: &EmbeddingState,
    g: &InteractionGraph,
    ds: &InteractionDataset,
    cutoffs: &[usize],
) -> Result<Vec<Vec<UserMetrics>>> {
    let test = ds.test_items_by_user();
    let max_cut = cutoffs.iter().copied().max().unwrap_or(0);
    let item_emb = state.item_embeddings()?;
    let user_emb = state.user_embeddings()?;
    let mut out = vec![Vec::new(); cutoffs.len()];
    for (u, test_items) in test.iter().enumerate() {
        if test_items.is_empty() {
            continue;
        }
        let scores = item_emb.dot(&user_emb.row(u));
        let full = RankedList {
            user: u,
            items: top_k_indices(scores.as_slice().expect("contiguous"), g.items_of(u), max_cut),
            cutoff: max_cut,
        };
        for (slot, &k) in out.iter_mut().zip(cutoffs) {
            let list = full.prefix(k);
            let (recall, precision) = recall_precision_at_k(&list, test_items);
            slot.push(UserMetrics {
                user: u,
                recall,
                precision,
                ndcg: ndcg_at_k(&list, test_items),
                ild: ild(&list, item_emb),
            });
        }
    }
    Ok(out)
}

/// One report per cutoff, averaged over users with at least one test item.
pub fn evaluate(
    state: &EmbeddingState,
    g: &InteractionGraph,
    ds: &InteractionDataset,
    cutoffs: &[usize],
    num_bins: usize,
) -> Result<Vec<MetricsReport>> {
    if cutoffs.is_empty() {
        return Err(Error::InvalidConfig("no evaluation cutoffs".into()));
    }
    let per_cutoff = evaluate_users(state, g, ds, cutoffs)?;
    let mut reports = Vec::with_capacity(cutoffs.len());
    for (users, &cutoff) in per_cutoff.iter().zip(cutoffs) {
        if users.is_empty() {
            return Err(Error::NoEvaluableUsers);
        }
        let n = users.len() as f64;
        let ilds: Vec<f64> = users.iter().filter_map(|m| m.ild).collect();
        let per_user: BTreeMap<usize, f64> = users.iter().map(|m| (m.user, m.ndcg)).collect();
        let fairness = match fairness_bins(&per_user, g, num_bins) {
            Ok(t) => Some(t),
            Err(Error::TooFewUsers { .. }) => None,
            Err(e) => return Err(e),
        };
        reports.push(MetricsReport {
            model: String::new(),
            cutoff,
            users: users.len(),
            recall: users.iter().map(|m| m.recall).sum::<f64>() / n,
            precision: users.iter().map(|m| m.precision).sum::<f64>() / n,
            ndcg: users.iter().map(|m| m.ndcg).sum::<f64>() / n,
            ild: if ilds.is_empty() { 0.0 } else { ilds.iter().sum::<f64>() / ilds.len() as f64 },
            fairness,
        });
    }
    Ok(reports)
}
