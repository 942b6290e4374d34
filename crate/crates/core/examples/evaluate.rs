//! Top-k evaluation of a trained model: accuracy, intra-list diversity and the
//! degree-binned fairness table.

use lightgcn::synthetic::{community_dataset, CommunityConfig};
use lightgcn::train::{train, TrainConfig};
use lightgcn::{evaluate, top_k, InteractionGraph};

fn main() -> lightgcn::Result<()> {
    let ds = community_dataset(&CommunityConfig::default(), 0.2)?;
    let g = InteractionGraph::build(&ds);
    let cfg = TrainConfig { epochs: 40, dim: 32, lr: 0.005, lambda: 1e-8, ..TrainConfig::default() };
    let state = train(&ds, &cfg, None)?.state;

    let list = top_k(&state, &g, 0, 10)?;
    println!("user 0 top-10: {:?}", list.items);

    for r in evaluate(&state, &g, &ds, &[10, 20], 4)? {
        println!(
            "@{}: recall {:.4} precision {:.4} ndcg {:.4} ild {:.4} ({} users)",
            r.cutoff, r.recall, r.precision, r.ndcg, r.ild, r.users
        );
        if let Some(f) = &r.fairness {
            for b in &f.bins {
                println!(
                    "  degree {:>3}..={:<3} users {:>3} ndcg {:.4}",
                    b.min_interactions, b.max_interactions, b.users, b.mean_metric
                );
            }
            println!("  gap {:.4} std {:.4}", f.gap, f.std);
        }
    }
    Ok(())
}
