//! APPNP diffusion: the teleport limits, convergence towards the personalized PageRank
//! fixed point, and a small teleport grid search over trained embeddings.

use lightgcn::synthetic::{community_dataset, CommunityConfig};
use lightgcn::train::{train, TrainConfig};
use lightgcn::{appnp, evaluate, grid_search_alpha, DiffusionConfig, InteractionGraph, Propagation};

fn main() -> lightgcn::Result<()> {
    let ds = community_dataset(&CommunityConfig { num_interactions: 3000, ..Default::default() }, 0.2)?;
    let g = InteractionGraph::build(&ds);
    let op = DiffusionConfig::default().operator(&g);

    let cfg = TrainConfig { epochs: 30, dim: 16, lr: 0.005, lambda: 1e-8, ..TrainConfig::default() };
    let trained = train(&ds, &cfg, None)?;
    let z0 = trained.state.combined()?.clone();

    let identity = appnp(&z0, &op, &DiffusionConfig { alpha: 1.0, ..Default::default() })?;
    println!("alpha=1 max change: {:e}", (&identity - &z0).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b)));

    let reference = appnp(&z0, &op, &DiffusionConfig { steps: 200, ..Default::default() })?;
    for steps in [1, 5, 10, 20, 50] {
        let z = appnp(&z0, &op, &DiffusionConfig { steps, ..Default::default() })?;
        let gap = (&z - &reference).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        println!("steps={steps:>3} distance to fixed point {gap:.3e}");
    }

    // post-hoc diffusion of the trained model, scored by NDCG@20
    let (best, table) = grid_search_alpha(&[0.05, 0.1, 0.2, 0.5, 1.0], |alpha| {
        let d = DiffusionConfig { alpha, apply_during_training: false, ..Default::default() };
        let prop = Propagation::new(&g, cfg.scheme, cfg.layers, Some(d));
        let mut state = trained.state.clone();
        prop.forward(&mut state, true)?;
        Ok(evaluate(&state, &g, &ds, &[20], 4)?[0].ndcg)
    })?;
    for (alpha, ndcg) in table {
        println!("alpha={alpha:<5} ndcg@20={ndcg:.4}");
    }
    println!("best alpha {best}");
    Ok(())
}
