//! Embedding state, K-layer linear propagation, layer combination and inner-product scoring.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

pub const DEFAULT_DIM: usize = 64;
pub const INIT_STD: f64 = 0.1;

/// Per-layer combination weights `alpha_0..=alpha_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights(Vec<f64>);

impl LayerWeights {
    /// `1 / (K + 1)` on every layer.
    pub fn uniform(layers: usize) -> Self {
        LayerWeights(vec![1.0 / (layers + 1) as f64; layers + 1])
    }

    /// Keeps only the last layer's output.
    pub fn last_layer(layers: usize) -> Self {
        let mut w = vec![0.0; layers + 1];
        w[layers] = 1.0;
        LayerWeights(w)
    }

    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig(
                "layer weights must be a nonempty list of finite values".into(),
            ));
        }
        Ok(LayerWeights(alphas))
    }

    /// Number of propagation layers K.
    pub fn layers(&self) -> usize {
        self.0.len() - 1
    }

    pub fn alphas(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone)]
struct Forward {
    generation: u64,
    per_layer: Vec<Array2<f64>>,
    combined: Array2<f64>,
    output: Option<Array2<f64>>,
}

/// Layer-0 parameters plus the cached result of the last forward pass.
///
/// Every mutable borrow of the parameters bumps a generation counter; reading
/// propagated embeddings after such a borrow and before the next [`propagate`](Self::propagate)
/// fails with [`Error::StaleForward`].
#[derive(Debug, Clone)]
pub struct EmbeddingState {
    num_users: usize,
    num_items: usize,
    layer0: Array2<f64>,
    generation: u64,
    forward: Option<Forward>,
}

impl EmbeddingState {
    /// i.i.d. `N(0, 0.1^2)` entries, deterministic in `seed`.
    pub fn init(num_users: usize, num_items: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let n = num_users + num_items;
        let layer0 = Array2::from_shape_simple_fn((n, dim), || normal.sample(&mut rng));
        Ok(Self::from_layer0(num_users, num_items, layer0))
    }

    pub fn from_layer0(num_users: usize, num_items: usize, layer0: Array2<f64>) -> Self {
        assert_eq!(layer0.nrows(), num_users + num_items, "layer0 row count");
        EmbeddingState {
            num_users,
            num_items,
            layer0,
            generation: 0,
            forward: None,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn dim(&self) -> usize {
        self.layer0.ncols()
    }

    pub fn layer0(&self) -> &Array2<f64> {
        &self.layer0
    }

    pub fn layer0_mut(&mut self) -> &mut Array2<f64> {
        self.generation += 1;
        &mut self.layer0
    }

    /// Runs `K = weights.layers()` rounds of `e^(k+1) = A e^(k)` and forms
    /// `combined = sum_k alpha_k e^(k)`. Clears any diffused output.
    pub fn propagate(&mut self, adj: &NormalizedAdjacency, weights: &LayerWeights) -> Result<()> {
        if adj.num_nodes() != self.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} nodes", self.num_nodes()),
                actual: format!("operator over {} nodes", adj.num_nodes()),
            });
        }
        let mut per_layer = Vec::with_capacity(weights.layers() + 1);
        per_layer.push(self.layer0.clone());
        for k in 0..weights.layers() {
            let next = adj.spmv(&per_layer[k])?;
            per_layer.push(next);
        }
        let combined = combine(&per_layer, weights);
        self.forward = Some(Forward {
            generation: self.generation,
            per_layer,
            combined,
            output: None,
        });
        Ok(())
    }

    fn fresh(&self) -> Result<&Forward> {
        match &self.forward {
            Some(f) if f.generation == self.generation => Ok(f),
            _ => Err(Error::StaleForward),
        }
    }

    pub fn is_fresh(&self) -> bool {
        self.fresh().is_ok()
    }

    /// `e^(0..=K)` from the last forward pass.
    pub fn per_layer(&self) -> Result<&[Array2<f64>]> {
        Ok(&self.fresh()?.per_layer)
    }

    /// The layer combination (before any diffusion).
    pub fn combined(&self) -> Result<&Array2<f64>> {
        Ok(&self.fresh()?.combined)
    }

    /// Installs a post-propagation transform of the embeddings (e.g. diffusion).
    pub fn set_output(&mut self, output: Array2<f64>) -> Result<()> {
        let generation = self.generation;
        let dims = (self.num_nodes(), self.dim());
        match &mut self.forward {
            Some(f) if f.generation == generation => {
                if output.dim() != dims {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{dims:?}"),
                        actual: format!("{:?}", output.dim()),
                    });
                }
                f.output = Some(output);
                Ok(())
            }
            _ => Err(Error::StaleForward),
        }
    }

    pub fn clear_output(&mut self) {
        if let Some(f) = &mut self.forward {
            f.output = None;
        }
    }

    pub fn has_output(&self) -> bool {
        self.fresh().map(|f| f.output.is_some()).unwrap_or(false)
    }

    /// Embeddings used for scoring: the diffused output if set, else the combination.
    pub fn final_embeddings(&self) -> Result<&Array2<f64>> {
        let f = self.fresh()?;
        Ok(f.output.as_ref().unwrap_or(&f.combined))
    }

    pub fn user_embeddings(&self) -> Result<ArrayView2<'_, f64>> {
        Ok(self.final_embeddings()?.slice(s![..self.num_users, ..]))
    }

    pub fn item_embeddings(&self) -> Result<ArrayView2<'_, f64>> {
        Ok(self.final_embeddings()?.slice(s![self.num_users.., ..]))
    }

    /// `<e_u, e_i>` over the final embeddings.
    pub fn score(&self, u: usize, i: usize) -> Result<f64> {
        self.check_user(u)?;
        if i >= self.num_items {
            return Err(Error::OutOfRange { kind: "item", id: i, count: self.num_items });
        }
        let emb = self.final_embeddings()?;
        Ok(emb.row(u).dot(&emb.row(self.num_users + i)))
    }

    /// Scores of user `u` against every item.
    pub fn score_all(&self, u: usize) -> Result<Array1<f64>> {
        self.check_user(u)?;
        let items = self.item_embeddings()?;
        let user: ArrayView1<'_, f64> = self.final_embeddings()?.row(u);
        Ok(items.dot(&user))
    }

    fn check_user(&self, u: usize) -> Result<()> {
        if u >= self.num_users {
            return Err(Error::OutOfRange { kind: "user", id: u, count: self.num_users });
        }
        Ok(())
    }
}

pub(crate) fn combine(per_layer: &[Array2<f64>], weights: &LayerWeights) -> Array2<f64> {
    let mut combined = Array2::zeros(per_layer[0].raw_dim());
    for (layer, &alpha) in per_layer.iter().zip(weights.alphas()) {
        combined.scaled_add(alpha, layer);
    }
    combined
}

/// Writes `num_nodes d` then one whitespace-separated row per node. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn save_checkpoint(path: &Path, embeddings: &Array2<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{} {}", embeddings.nrows(), embeddings.ncols()).map_err(io)?;
    for row in embeddings.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse { path: path.into(), line, message };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(1, format!("bad header token {t:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(1, "header must be `num_nodes d`".into()));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (n, line) in lines.enumerate().take(rows) {
        let before = data.len();
        for t in line.split_whitespace() {
            data.push(t.parse::<f64>().map_err(|_| parse_err(n + 2, format!("bad value {t:?}")))?);
        }
        if data.len() - before != cols {
            return Err(parse_err(n + 2, format!("expected {cols} values")));
        }
    }
    if data.len() != rows * cols {
        return Err(parse_err(rows + 1, format!("expected {rows} rows")));
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize, InteractionGraph, NormScheme};
    use ndarray::array;

    fn toy_adj() -> NormalizedAdjacency {
        normalize(&InteractionGraph::from_pairs(2, 2, &[(0, 0), (0, 1), (1, 0)]), NormScheme::LIGHTGCN)
    }

    #[test]
    fn init_is_seeded() {
        let a = EmbeddingState::init(20, 30, 8, 1).unwrap();
        let b = EmbeddingState::init(20, 30, 8, 1).unwrap();
        let c = EmbeddingState::init(20, 30, 8, 2).unwrap();
        assert_eq!(a.layer0(), b.layer0());
        assert_ne!(a.layer0(), c.layer0());
        assert!(EmbeddingState::init(1, 1, 0, 0).is_err());
    }

    #[test]
    fn init_sample_std() {
        // 400 draws: the sample std of N(0, 0.1) lies in [0.07, 0.13] far beyond 5 sigma
        let state = EmbeddingState::init(20, 30, 8, 11).unwrap();
        let n = state.layer0().len() as f64;
        let mean = state.layer0().sum() / n;
        let var = state.layer0().mapv(|v| (v - mean).powi(2)).sum() / (n - 1.0);
        assert!((0.07..=0.13).contains(&var.sqrt()), "std {}", var.sqrt());
    }

    #[test]
    fn zero_layers_is_matrix_factorization() {
        let mut state = EmbeddingState::init(2, 2, 3, 5).unwrap();
        state.propagate(&toy_adj(), &LayerWeights::uniform(0)).unwrap();
        assert_eq!(state.combined().unwrap(), state.layer0());
        assert_eq!(state.per_layer().unwrap().len(), 1);
    }

    #[test]
    fn uniform_combination_of_two_layers() {
        let adj = toy_adj();
        let mut state = EmbeddingState::init(2, 2, 3, 5).unwrap();
        state.propagate(&adj, &LayerWeights::uniform(2)).unwrap();
        let e0 = state.layer0().clone();
        let e1 = adj.spmv(&e0).unwrap();
        let e2 = adj.spmv(&e1).unwrap();
        let expected = (&e0 + &e1 + &e2) / 3.0;
        let got = state.combined().unwrap();
        assert!(got.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(&state.per_layer().unwrap()[0], state.layer0());
    }

    #[test]
    fn scoring_examples() {
        let layer0 = array![[1.0, 2.0], [3.0, -1.0]];
        let mut state = EmbeddingState::from_layer0(1, 1, layer0);
        let adj = normalize(&InteractionGraph::from_pairs(1, 1, &[(0, 0)]), NormScheme::LIGHTGCN);
        state.propagate(&adj, &LayerWeights::uniform(0)).unwrap();
        assert_eq!(state.score(0, 0).unwrap(), 1.0);
        assert_eq!(state.score_all(0).unwrap().to_vec(), vec![1.0]);
        assert!(state.score(1, 0).is_err());
        assert!(state.score(0, 1).is_err());

        let mut state = EmbeddingState::from_layer0(1, 1, array![[1.0, 0.0], [0.0, 1.0]]);
        state.propagate(&adj, &LayerWeights::uniform(0)).unwrap();
        assert_eq!(state.score(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn zero_user_embedding_scores_zero() {
        let layer0 = array![[0.0, 0.0], [0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]];
        let mut state = EmbeddingState::from_layer0(2, 2, layer0);
        state.propagate(&toy_adj(), &LayerWeights::uniform(0)).unwrap();
        assert!(state.score_all(0).unwrap().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn mutation_makes_forward_stale() {
        let mut state = EmbeddingState::init(2, 2, 3, 5).unwrap();
        assert!(matches!(state.combined(), Err(Error::StaleForward)));
        state.propagate(&toy_adj(), &LayerWeights::uniform(1)).unwrap();
        assert!(state.is_fresh());
        state.layer0_mut()[[0, 0]] += 1.0;
        assert!(matches!(state.score(0, 0), Err(Error::StaleForward)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.txt");
        let state = EmbeddingState::init(3, 4, 5, 9).unwrap();
        save_checkpoint(&path, state.layer0()).unwrap();
        assert_eq!(&load_checkpoint(&path).unwrap(), state.layer0());
        fs::write(&path, "2 2\n1 2\n3\n").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Parse { line: 3, .. })));
    }
}
