//! Writes a seeded community-structured dataset.
//!
//! ```text
//! cargo run --example synthetic_data -- <out-dir> [users items interactions] [seed]
//! ```
//! With `--single` the whole interaction set goes to one adjacency-list file instead of
//! a train/test split.

use std::path::PathBuf;

use lightgcn::dataset::save_interactions;
use lightgcn::synthetic::{community_dataset, community_interactions, CommunityConfig};
use lightgcn::Format;

fn main() -> lightgcn::Result<()> {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let single = args.iter().any(|a| a == "--single");
    args.retain(|a| a != "--single");
    let out = PathBuf::from(args.first().map(String::as_str).unwrap_or("synthetic"));
    let num = |k: usize, default: usize| args.get(k).and_then(|v| v.parse().ok()).unwrap_or(default);

    let base = CommunityConfig::electronics_sized(num(4, 0) as u64);
    let cfg = CommunityConfig {
        num_users: num(1, base.num_users),
        num_items: num(2, base.num_items),
        num_interactions: num(3, base.num_interactions),
        ..base
    };

    if single {
        let pairs = community_interactions(&cfg)?;
        save_interactions(&out, cfg.num_users, &pairs, Format::AdjacencyList)?;
        println!("wrote {} interactions to {}", pairs.len(), out.display());
    } else {
        let ds = community_dataset(&cfg, 0.2)?;
        ds.save_dir(&out, Format::AdjacencyList)?;
        println!("wrote {} train / {} test to {}", ds.train.len(), ds.test.len(), out.display());
    }
    Ok(())
}
