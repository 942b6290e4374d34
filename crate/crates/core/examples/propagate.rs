//! Builds the normalized adjacency of a toy graph under each weighting scheme and runs
//! one and two propagation layers.

use lightgcn::{normalize, EmbeddingState, InteractionGraph, LayerWeights, NormScheme};
use ndarray::array;

fn main() -> lightgcn::Result<()> {
    // u0 -> {i0, i1}, u1 -> {i0}
    let g = InteractionGraph::from_pairs(2, 2, &[(0, 0), (0, 1), (1, 0)]);
    let layer0 = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 1.0]];

    for scheme in NormScheme::ALL {
        let adj = normalize(&g, scheme);
        println!("{scheme} ({} nonzeros, symmetric: {})", adj.nnz(), adj.is_symmetric());
        println!("{:.4}", adj.to_dense());

        let mut state = EmbeddingState::from_layer0(2, 2, layer0.clone());
        state.propagate(&adj, &LayerWeights::uniform(2))?;
        println!("combined (K=2):\n{:.4}", state.combined()?);
        println!("score(u0, i1) = {:.4}\n", state.score(0, 1)?);
    }
    Ok(())
}
