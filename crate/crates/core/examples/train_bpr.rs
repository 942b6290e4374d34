//! Trains LightGCN with BPR and Adam on a small synthetic dataset and prints the loss and
//! recall curves.
//!
//! ```text
//! cargo run --release --example train_bpr -- [layers] [epochs] [scheme]
//! ```

use lightgcn::synthetic::{community_dataset, CommunityConfig};
use lightgcn::train::{train, EvalHook, TrainConfig};
use lightgcn::{evaluate, EmbeddingState, InteractionGraph, NormScheme};

fn main() -> lightgcn::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let layers = args.first().and_then(|v| v.parse().ok()).unwrap_or(3);
    let epochs = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(100);
    let scheme: NormScheme = args.get(2).map_or(Ok(NormScheme::LIGHTGCN), |s| s.parse())?;

    let ds = community_dataset(&CommunityConfig::default(), 0.2)?;
    let g = InteractionGraph::build(&ds);
    let cfg = TrainConfig {
        epochs,
        layers,
        scheme,
        dim: 32,
        lr: 0.005,
        lambda: 1e-4 / ds.train.len() as f64,
        eval_every: 10,
        ..TrainConfig::default()
    };

    let mut recall = |_epoch: usize, s: &EmbeddingState| -> lightgcn::Result<Vec<(String, f64)>> {
        let r = &evaluate(s, &g, &ds, &[20], 4)?[0];
        Ok(vec![("recall@20".into(), r.recall), ("ndcg@20".into(), r.ndcg)])
    };
    let out = train(&ds, &cfg, Some(&mut recall as &mut EvalHook))?;
    print!("{}", out.history.to_csv());
    Ok(())
}
