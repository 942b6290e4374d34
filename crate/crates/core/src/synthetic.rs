//! Seeded synthetic interaction data with planted community structure.
//!
//! Users and items are assigned to communities; most interactions fall inside a user's
//! own community, the rest follow global item popularity. User activity is log-normal so
//! degree bins for fairness analysis are well populated.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::dataset::{holdout_split, InteractionDataset, Pair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityConfig {
    pub num_users: usize,
    pub num_items: usize,
    /// Exact number of distinct interactions to generate.
    pub num_interactions: usize,
    pub num_communities: usize,
    /// Probability that an interaction stays within the user's community.
    pub in_community: f64,
    /// Every user receives at least this many interactions.
    pub min_user_degree: usize,
    /// Zipf exponent of item popularity.
    pub popularity_exponent: f64,
    /// Log-normal sigma of user activity.
    pub activity_sigma: f64,
    pub seed: u64,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig {
            num_users: 300,
            num_items: 400,
            num_interactions: 6000,
            num_communities: 6,
            in_community: 0.85,
            min_user_degree: 5,
            popularity_exponent: 0.8,
            activity_sigma: 0.8,
            seed: 0,
        }
    }
}

impl CommunityConfig {
    /// Same user/item/interaction counts as the Amazon-Electronics dump (1434 x 1522, 35931).
    pub fn electronics_sized(seed: u64) -> Self {
        CommunityConfig {
            num_users: 1434,
            num_items: 1522,
            num_interactions: 35931,
            num_communities: 10,
            seed,
            ..CommunityConfig::default()
        }
    }
}

/// Generates exactly `num_interactions` distinct pairs. Every user and every item is
/// touched at least once. Output is sorted.
pub fn community_interactions(cfg: &CommunityConfig) -> Result<Vec<Pair>> {
    let (nu, ni, c) = (cfg.num_users, cfg.num_items, cfg.num_communities.max(1));
    let cells = nu.saturating_mul(ni);
    let floor = ni.max(nu * cfg.min_user_degree.min(ni));
    if nu == 0 || ni == 0 || cfg.num_interactions > cells / 2 || cfg.num_interactions < floor {
        return Err(Error::InvalidConfig(format!(
            "cannot place {} interactions on a {nu} x {ni} grid with min degree {}",
            cfg.num_interactions, cfg.min_user_degree
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let user_comm: Vec<usize> = (0..nu).map(|u| u % c).collect();
    let mut item_comm: Vec<usize> = (0..ni).map(|i| i % c).collect();
    item_comm.shuffle(&mut rng);

    let mut rank: Vec<usize> = (0..ni).collect();
    rank.shuffle(&mut rng);
    let popularity: Vec<f64> = rank
        .iter()
        .map(|&r| 1.0 / ((r + 1) as f64).powf(cfg.popularity_exponent))
        .collect();
    let members: Vec<Vec<usize>> = (0..c)
        .map(|k| (0..ni).filter(|&i| item_comm[i] == k).collect())
        .collect();
    let by_comm: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| popularity[i])).expect("community has items"))
        .collect();
    let global = WeightedIndex::new(&popularity).expect("positive weights");
    let normal = Normal::new(0.0, cfg.activity_sigma).expect("finite sigma");
    let activity = WeightedIndex::new((0..nu).map(|_| normal.sample(&mut rng).exp()))
        .expect("positive weights");

    let mut seen: HashSet<Pair> = HashSet::with_capacity(cfg.num_interactions);
    let mut degree = vec![0usize; nu];
    let draw_item = |rng: &mut ChaCha8Rng, u: usize| -> usize {
        if rng.random_bool(cfg.in_community) {
            let k = user_comm[u];
            members[k][by_comm[k].sample(rng)]
        } else {
            global.sample(rng)
        }
    };

    // every item once, from a user in its community
    let users_in: Vec<Vec<usize>> = (0..c)
        .map(|k| (0..nu).filter(|&u| user_comm[u] == k).collect())
        .collect();
    for i in 0..ni {
        let pool = &users_in[item_comm[i]];
        let u = if pool.is_empty() { rng.random_range(0..nu) } else { pool[rng.random_range(0..pool.len())] };
        seen.insert((u, i));
        degree[u] += 1;
    }
    for u in 0..nu {
        while degree[u] < cfg.min_user_degree.min(ni) {
            let i = draw_item(&mut rng, u);
            if seen.insert((u, i)) {
                degree[u] += 1;
            }
        }
    }
    let mut attempts = 0usize;
    while seen.len() < cfg.num_interactions {
        attempts += 1;
        if attempts > 200 * cfg.num_interactions {
            return Err(Error::InvalidConfig(
                "synthetic generator failed to place enough distinct interactions".into(),
            ));
        }
        let u = activity.sample(&mut rng);
        let i = draw_item(&mut rng, u);
        seen.insert((u, i));
    }
    let mut pairs: Vec<Pair> = seen.into_iter().collect();
    pairs.sort_unstable();
    Ok(pairs)
}

/// Generates interactions and applies the per-user holdout split.
pub fn community_dataset(cfg: &CommunityConfig, test_fraction: f64) -> Result<InteractionDataset> {
    let pairs = community_interactions(cfg)?;
    let mut ds = holdout_split(&pairs, test_fraction, cfg.seed.wrapping_add(1))?;
    // holdout infers counts from max ids; both are covered by construction
    ds.num_users = cfg.num_users;
    ds.num_items = cfg.num_items;
    Ok(ds)
}
