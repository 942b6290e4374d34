//! Linear graph collaborative filtering.
//!
//! LightGCN propagates ID embeddings over the user-item bipartite graph with a fixed
//! degree-normalized operator, averages the layer outputs and scores pairs by inner
//! product. This crate implements that model end to end:
//!
//! * [`dataset`]: interaction files, id remapping, holdout splits, statistics;
//! * [`graph`]: the bipartite graph and the six normalization schemes of the operator;
//! * [`model`]: embeddings, K-layer propagation, layer combination, scoring;
//! * [`train`]: BPR sampling, exact gradients through propagation, Adam;
//! * [`diffusion`]: APPNP personalized-PageRank diffusion of the final embeddings;
//! * [`eval`]: top-K retrieval, Recall/Precision/NDCG, intra-list distance, fairness bins;
//! * [`experiment`]: run orchestration, sweeps, reports and plot data behind the `lightgcn` binary.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/` directory.

pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod model;
pub mod synthetic;
pub mod train;

pub use dataset::{compute_stats, holdout_split, load_interactions, DatasetStats, Format, InteractionDataset};
pub use diffusion::{appnp, appnp_transpose, grid_search_alpha, DiffusionConfig, DiffusionStart};
pub use error::{Error, Result};
pub use eval::{evaluate, fairness_bins, ild, ndcg_at_k, recall_precision_at_k, top_k, MetricsReport, RankedList};
pub use graph::{normalize, InteractionGraph, Norm, NormScheme, NormalizedAdjacency, Side};
pub use model::{EmbeddingState, LayerWeights};
pub use train::{train, AdamState, BprTriple, History, Propagation, TrainConfig, TrainOutcome};
