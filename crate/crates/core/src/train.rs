//! BPR training: uniform triple sampling, exact gradients through the linear propagation
//! (and optional diffusion), and Adam updates of the layer-0 embeddings.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::InteractionDataset;
use crate::diffusion::{appnp, appnp_transpose, DiffusionConfig, DiffusionStart};
use crate::error::{Error, Result};
use crate::graph::{normalize, InteractionGraph, NormScheme, NormalizedAdjacency};
use crate::model::{EmbeddingState, LayerWeights, DEFAULT_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// L2 coefficient on the layer-0 embeddings.
    pub lambda: f64,
    pub batch_size: usize,
    /// Propagation layers K.
    pub layers: usize,
    pub scheme: NormScheme,
    pub dim: usize,
    pub seed: u64,
    pub diffusion: Option<DiffusionConfig>,
    /// Evaluation cadence in epochs; the last epoch is always evaluated.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            lr: 0.001,
            lambda: 1e-4,
            batch_size: 1024,
            layers: 3,
            scheme: NormScheme::LIGHTGCN,
            dim: DEFAULT_DIM,
            seed: 0,
            diffusion: None,
            eval_every: 20,
        }
    }
}

impl TrainConfig {
    /// Defaults for diffusion runs: 600 epochs, alpha 0.1, 10 steps.
    pub fn with_diffusion(diffusion: DiffusionConfig) -> Self {
        TrainConfig {
            epochs: 600,
            diffusion: Some(diffusion),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 || self.dim == 0 || self.eval_every == 0 {
            return bad("batch size, dimension and eval cadence must be >= 1".into());
        }
        if let Some(d) = &self.diffusion {
            d.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BprTriple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

/// Draws `(u, i, j)` with `(u, i)` uniform over train interactions and `j` uniform over the
/// items `u` has not interacted with. Users connected to every item cannot yield a
/// negative and are left out.
#[derive(Debug, Clone)]
pub struct BprSampler<'g> {
    graph: &'g InteractionGraph,
    edges: Vec<(usize, usize)>,
}

impl<'g> BprSampler<'g> {
    pub fn new(graph: &'g InteractionGraph) -> Self {
        let mut skipped = 0;
        let mut edges = Vec::with_capacity(graph.num_interactions());
        for u in 0..graph.num_users() {
            if graph.user_degree(u) >= graph.num_items() {
                skipped += 1;
                continue;
            }
            edges.extend(graph.items_of(u).iter().map(|&i| (u, i)));
        }
        if skipped > 0 {
            log::warn!("{skipped} users interact with every item and are not sampled");
        }
        BprSampler { graph, edges }
    }

    pub fn num_candidates(&self) -> usize {
        self.edges.len()
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<BprTriple> {
        if self.edges.is_empty() {
            return Vec::new();
        }
        let num_items = self.graph.num_items();
        (0..n)
            .map(|_| {
                let (user, pos) = self.edges[rng.random_range(0..self.edges.len())];
                let neg = loop {
                    let j = rng.random_range(0..num_items);
                    if !self.graph.has_interaction(user, j) {
                        break j;
                    }
                };
                BprTriple { user, pos, neg }
            })
            .collect()
    }
}

pub fn sample_batch<R: Rng>(g: &InteractionGraph, batch_size: usize, rng: &mut R) -> Vec<BprTriple> {
    BprSampler::new(g).sample(batch_size, rng)
}

/// `ln sigmoid(x)` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-(1/B) sum ln sigmoid(pos - neg) + lambda * ||layer0||_F^2`.
pub fn bpr_loss(scores_pos: &[f64], scores_neg: &[f64], layer0: &Array2<f64>, lambda: f64) -> Result<f64> {
    if scores_pos.len() != scores_neg.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} negative scores", scores_pos.len()),
            actual: scores_neg.len().to_string(),
        });
    }
    let data = if scores_pos.is_empty() {
        0.0
    } else {
        -scores_pos
            .iter()
            .zip(scores_neg)
            .map(|(p, n)| log_sigmoid(p - n))
            .sum::<f64>()
            / scores_pos.len() as f64
    };
    Ok(data + lambda * layer0.iter().map(|v| v * v).sum::<f64>())
}

/// The trained pipeline: layer propagation, combination, optional diffusion.
#[derive(Debug, Clone)]
pub struct Propagation {
    adj: NormalizedAdjacency,
    adj_t: Option<NormalizedAdjacency>,
    weights: LayerWeights,
    diffusion: Option<(DiffusionConfig, NormalizedAdjacency)>,
}

impl Propagation {
    pub fn new(g: &InteractionGraph, scheme: NormScheme, layers: usize, diffusion: Option<DiffusionConfig>) -> Self {
        let adj = normalize(g, scheme);
        let diffusion = diffusion.map(|cfg| {
            let op = cfg.operator(g);
            (cfg, op)
        });
        Self::from_parts(adj, LayerWeights::uniform(layers), diffusion)
    }

    pub fn from_parts(
        adj: NormalizedAdjacency,
        weights: LayerWeights,
        diffusion: Option<(DiffusionConfig, NormalizedAdjacency)>,
    ) -> Self {
        let adj_t = (!adj.is_symmetric()).then(|| adj.transpose());
        Propagation { adj, adj_t, weights, diffusion }
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adj
    }

    pub fn weights(&self) -> &LayerWeights {
        &self.weights
    }

    pub fn diffusion(&self) -> Option<&DiffusionConfig> {
        self.diffusion.as_ref().map(|(cfg, _)| cfg)
    }

    /// Whether the training forward pass includes diffusion.
    pub fn diffuses_in_training(&self) -> bool {
        self.diffusion().is_some_and(|d| d.apply_during_training)
    }

    /// Propagates and, when `diffuse` is set and diffusion is configured, installs the
    /// diffused embeddings as the scoring output.
    pub fn forward(&self, state: &mut EmbeddingState, diffuse: bool) -> Result<()> {
        state.propagate(&self.adj, &self.weights)?;
        if let (true, Some((cfg, op))) = (diffuse, &self.diffusion) {
            let diffused = {
                let z0 = match cfg.start {
                    DiffusionStart::Combined => state.combined()?,
                    DiffusionStart::LastLayer => state.per_layer()?.last().expect("layer 0 present"),
                };
                appnp(z0, op, cfg)?
            };
            state.set_output(diffused)?;
        }
        Ok(())
    }

    /// Pulls a gradient w.r.t. the scoring embeddings back to layer 0:
    /// `P^T J^T g` with `P = sum_k alpha_k A^k`. Diffusion is included when the state
    /// carries a diffused output.
    pub fn pullback(&self, state: &EmbeddingState, grad_final: Array2<f64>) -> Result<Array2<f64>> {
        let (grad, weights) = match (&self.diffusion, state.has_output()) {
            (Some((cfg, op)), true) => {
                let g = appnp_transpose(&grad_final, op, cfg)?;
                let w = match cfg.start {
                    DiffusionStart::Combined => self.weights.clone(),
                    DiffusionStart::LastLayer => LayerWeights::last_layer(self.weights.layers()),
                };
                (g, w)
            }
            _ => (grad_final, self.weights.clone()),
        };
        propagate_transpose(self.adj_t.as_ref().unwrap_or(&self.adj), &weights, grad)
    }
}

/// `sum_k alpha_k (A^T)^k g`, given `A^T`.
pub fn propagate_transpose(adj_t: &NormalizedAdjacency, weights: &LayerWeights, g: Array2<f64>) -> Result<Array2<f64>> {
    let alphas = weights.alphas();
    let mut acc = g.clone() * alphas[0];
    let mut cur = g;
    let mut next = Array2::zeros(cur.raw_dim());
    for &alpha in &alphas[1..] {
        adj_t.spmv_into(&cur, &mut next)?;
        std::mem::swap(&mut cur, &mut next);
        acc.scaled_add(alpha, &cur);
    }
    Ok(acc)
}

/// BPR loss of a batch and its gradient w.r.t. the scoring embeddings (no regularizer).
pub fn bpr_output_gradient(batch: &[BprTriple], state: &EmbeddingState) -> Result<(f64, Array2<f64>)> {
    let emb = state.final_embeddings()?;
    let nu = state.num_users();
    let mut grad = Array2::zeros(emb.raw_dim());
    if batch.is_empty() {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for t in batch {
        let (u, i, j) = (t.user, nu + t.pos, nu + t.neg);
        let (eu, ei, ej) = (emb.row(u), emb.row(i), emb.row(j));
        let delta = eu.dot(&ei) - eu.dot(&ej);
        loss -= log_sigmoid(delta) * scale;
        // d(-ln sigmoid(delta))/d delta = -sigmoid(-delta)
        let c = -sigmoid(-delta) * scale;
        for k in 0..emb.ncols() {
            grad[[u, k]] += c * (ei[k] - ej[k]);
            grad[[i, k]] += c * eu[k];
            grad[[j, k]] -= c * eu[k];
        }
    }
    Ok((loss, grad))
}

/// Gradient of the regularized BPR loss w.r.t. layer 0. The state must hold a forward
/// pass for its current parameters.
pub fn backward(batch: &[BprTriple], state: &EmbeddingState, prop: &Propagation, lambda: f64) -> Result<Array2<f64>> {
    Ok(loss_and_gradient(batch, state, prop, lambda)?.1)
}

pub fn loss_and_gradient(
    batch: &[BprTriple],
    state: &EmbeddingState,
    prop: &Propagation,
    lambda: f64,
) -> Result<(f64, Array2<f64>)> {
    let (data_loss, grad_final) = bpr_output_gradient(batch, state)?;
    let mut grad = prop.pullback(state, grad_final)?;
    let layer0 = state.layer0();
    grad.scaled_add(2.0 * lambda, layer0);
    let reg = lambda * layer0.iter().map(|v| v * v).sum::<f64>();
    Ok((data_loss + reg, grad))
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shape: (usize, usize)) -> Self {
        AdamState {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update of `param` in place.
    pub fn step(&mut self, param: &mut Array2<f64>, grad: &Array2<f64>, lr: f64) -> Result<()> {
        if param.dim() != grad.dim() || param.dim() != self.m.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.m.dim()),
                actual: format!("param {:?}, grad {:?}", param.dim(), grad.dim()),
            });
        }
        if let Some(bad) = grad.iter().position(|g| !g.is_finite()) {
            let (r, c) = (bad / grad.ncols(), bad % grad.ncols());
            return Err(Error::NonFinite(format!("gradient entry ({r}, {c}) is {}", grad[[r, c]])));
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        Ok(())
    }
}

pub fn adam_step(layer0: &mut Array2<f64>, grad: &Array2<f64>, s: &mut AdamState, lr: f64) -> Result<()> {
    s.step(layer0, grad, lr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Present on evaluated epochs, in `History::metric_names` order.
    pub metrics: Option<Vec<f64>>,
}

/// Per-epoch loss and cadenced metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub metric_names: Vec<String>,
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// `(epoch, value)` for every evaluated epoch.
    pub fn metric_series(&self, name: &str) -> Option<Vec<(usize, f64)>> {
        let col = self.metric_names.iter().position(|n| n == name)?;
        Some(
            self.records
                .iter()
                .filter_map(|r| r.metrics.as_ref().map(|m| (r.epoch, m[col])))
                .collect(),
        )
    }

    /// `epoch,loss,<metrics...>`; metric cells are empty on epochs without evaluation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss");
        for name in &self.metric_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{}", r.epoch, r.loss));
            for k in 0..self.metric_names.len() {
                out.push(',');
                if let Some(m) = &r.metrics {
                    out.push_str(&m[k].to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<History> {
        let bad = |line: usize, message: String| Error::Parse { path: "history.csv".into(), line, message };
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "empty history".into()))?.split(',').collect();
        if header.len() < 2 || header[0] != "epoch" || header[1] != "loss" {
            return Err(bad(1, "header must start with epoch,loss".into()));
        }
        let metric_names: Vec<String> = header[2..].iter().map(|s| s.to_string()).collect();
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(bad(n + 2, format!("expected {} cells", header.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n + 2, format!("bad number {s:?}")));
            let epoch = cells[0].parse().map_err(|_| bad(n + 2, "bad epoch".into()))?;
            let metrics = if cells[2..].iter().all(|c| c.is_empty()) || metric_names.is_empty() {
                None
            } else {
                Some(cells[2..].iter().map(|c| num(c)).collect::<Result<Vec<_>>>()?)
            };
            records.push(EpochRecord { epoch, loss: num(cells[1])?, metrics });
        }
        Ok(History { metric_names, records })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Callback run on evaluated epochs with a fresh forward pass (diffused output installed
/// when diffusion is configured). Returns named metric values; names must not change
/// between calls.
pub type EvalHook<'a> = dyn FnMut(usize, &EmbeddingState) -> Result<Vec<(String, f64)>> + 'a;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Forward pass is fresh, including the diffused output for diffusion runs.
    pub state: EmbeddingState,
    pub propagation: Propagation,
    pub history: History,
}

pub fn train(ds: &InteractionDataset, cfg: &TrainConfig, mut hook: Option<&mut EvalHook<'_>>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let graph = InteractionGraph::build(ds);
    if graph.num_interactions() == 0 {
        return Err(Error::EmptyDataset("no train interactions".into()));
    }
    let prop = Propagation::new(&graph, cfg.scheme, cfg.layers, cfg.diffusion);
    let mut state = EmbeddingState::init(ds.num_users, ds.num_items, cfg.dim, cfg.seed)?;
    let mut adam = AdamState::new(state.layer0().dim());
    let sampler = BprSampler::new(&graph);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let per_epoch = graph.num_interactions();
    let steps = per_epoch.div_ceil(cfg.batch_size);
    let diffuse = prop.diffuses_in_training();
    let mut history = History::default();

    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        for step in 0..steps {
            let n = cfg.batch_size.min(per_epoch - step * cfg.batch_size);
            let batch = sampler.sample(n, &mut rng);
            prop.forward(&mut state, diffuse)?;
            let (loss, grad) = loss_and_gradient(&batch, &state, &prop, cfg.lambda)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss {loss} at epoch {epoch}")));
            }
            loss_sum += loss;
            adam.step(state.layer0_mut(), &grad, cfg.lr)?;
        }
        let mut record = EpochRecord { epoch, loss: loss_sum / steps as f64, metrics: None };
        if let Some(hook) = hook.as_deref_mut() {
            if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
                prop.forward(&mut state, true)?;
                let named = hook(epoch, &state)?;
                if history.metric_names.is_empty() {
                    history.metric_names = named.iter().map(|(n, _)| n.clone()).collect();
                } else if named.len() != history.metric_names.len()
                    || named.iter().zip(&history.metric_names).any(|((a, _), b)| a != b)
                {
                    return Err(Error::Run("evaluation hook changed its metric names".into()));
                }
                record.metrics = Some(named.into_iter().map(|(_, v)| v).collect());
            }
        }
        history.records.push(record);
    }
    prop.forward(&mut state, true)?;
    Ok(TrainOutcome { state, propagation: prop, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn forced_negative() {
        let g = InteractionGraph::from_pairs(1, 2, &[(0, 0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in sample_batch(&g, 50, &mut rng) {
            assert_eq!((t.user, t.pos, t.neg), (0, 0, 1));
        }
    }

    #[test]
    fn saturated_users_are_skipped() {
        let g = InteractionGraph::from_pairs(2, 2, &[(0, 0), (0, 1), (1, 0)]);
        let sampler = BprSampler::new(&g);
        assert_eq!(sampler.num_candidates(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sampler.sample(20, &mut rng).iter().all(|t| t.user == 1 && t.neg == 1));
    }

    #[test]
    fn sampling_is_seeded() {
        let g = InteractionGraph::from_pairs(3, 5, &[(0, 0), (0, 3), (1, 2), (2, 4), (2, 1)]);
        let a = sample_batch(&g, 64, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_batch(&g, 64, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        for t in &a {
            assert!(g.has_interaction(t.user, t.pos) && !g.has_interaction(t.user, t.neg));
        }
    }

    #[test]
    fn positive_frequencies_are_uniform() {
        // binomial(10^4, 1/2): sigma = 50
        let g = InteractionGraph::from_pairs(1, 5, &[(0, 1), (0, 3)]);
        let batch = sample_batch(&g, 10_000, &mut ChaCha8Rng::seed_from_u64(7));
        let ones = batch.iter().filter(|t| t.pos == 1).count() as f64;
        assert!((ones - 5000.0).abs() <= 150.0, "{ones}");
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sigmoid(1000.0), 0.0);
        assert!((log_sigmoid(-1000.0) + 1000.0).abs() < 1e-12);
        assert!(log_sigmoid(800.0).is_finite() && sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn bpr_loss_examples() {
        let zeros = Array2::zeros((2, 2));
        let l = bpr_loss(&[0.3, -1.0], &[0.3, -1.0], &zeros, 0.0).unwrap();
        assert!((l - 0.693147).abs() < 1e-6);
        assert!(bpr_loss(&[1e6], &[0.0], &zeros, 0.0).unwrap() < 1e-12);
        assert_eq!(bpr_loss(&[], &[], &zeros, 1e-4).unwrap(), 0.0);
        let e = array![[1.0, -2.0], [0.5, 0.0]];
        let l = bpr_loss(&[2.0], &[2.0], &e, 1e-4).unwrap();
        assert!((l - (std::f64::consts::LN_2 + 1e-4 * 5.25)).abs() < 1e-15);
        assert!(bpr_loss(&[1.0], &[], &e, 0.0).is_err());
    }

    #[test]
    fn adam_first_step() {
        let mut theta = Array2::zeros((1, 1));
        let mut s = AdamState::new((1, 1));
        s.step(&mut theta, &array![[1.0]], 0.001).unwrap();
        assert!((theta[[0, 0]] + 0.001 / (1.0 + 1e-8)).abs() < 1e-18);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_zero_gradient_and_odd_symmetry() {
        let mut theta = array![[0.5, -0.25]];
        let mut s = AdamState::new((1, 2));
        for _ in 0..5 {
            s.step(&mut theta, &Array2::zeros((1, 2)), 0.01).unwrap();
        }
        assert_eq!(theta, array![[0.5, -0.25]]);

        let g = array![[0.3, -2.0]];
        let (mut a, mut b) = (Array2::zeros((1, 2)), Array2::zeros((1, 2)));
        let (mut sa, mut sb) = (AdamState::new((1, 2)), AdamState::new((1, 2)));
        for _ in 0..3 {
            sa.step(&mut a, &g, 0.01).unwrap();
            sb.step(&mut b, &(-&g), 0.01).unwrap();
        }
        assert_eq!(a, -b);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut theta = Array2::zeros((1, 2));
        let mut s = AdamState::new((1, 2));
        let err = s.step(&mut theta, &array![[0.0, f64::NAN]], 0.01).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(s.t, 0);
    }

    #[test]
    fn zero_output_gradient_leaves_regularizer() {
        let g = InteractionGraph::from_pairs(2, 3, &[(0, 0), (0, 2), (1, 1)]);
        let prop = Propagation::new(&g, NormScheme::LIGHTGCN, 2, None);
        let mut state = EmbeddingState::init(2, 3, 4, 1).unwrap();
        prop.forward(&mut state, true).unwrap();
        let grad = backward(&[], &state, &prop, 0.5).unwrap();
        assert_eq!(grad, state.layer0() * 1.0);
    }

    #[test]
    fn stale_forward_is_rejected() {
        let g = InteractionGraph::from_pairs(1, 2, &[(0, 0)]);
        let prop = Propagation::new(&g, NormScheme::LIGHTGCN, 1, None);
        let mut state = EmbeddingState::init(1, 2, 2, 1).unwrap();
        prop.forward(&mut state, true).unwrap();
        state.layer0_mut()[[0, 0]] = 3.0;
        let batch = [BprTriple { user: 0, pos: 0, neg: 1 }];
        assert!(matches!(backward(&batch, &state, &prop, 0.0), Err(Error::StaleForward)));
    }

    #[test]
    fn history_csv_round_trip() {
        let h = History {
            metric_names: vec!["lgcn_recall@20".into()],
            records: vec![
                EpochRecord { epoch: 1, loss: 0.69, metrics: None },
                EpochRecord { epoch: 2, loss: 0.5, metrics: Some(vec![0.125]) },
            ],
        };
        let csv = h.to_csv();
        assert_eq!(csv, "epoch,loss,lgcn_recall@20\n1,0.69,\n2,0.5,0.125\n");
        assert_eq!(History::from_csv(&csv).unwrap(), h);
        assert_eq!(h.metric_series("lgcn_recall@20").unwrap(), vec![(2, 0.125)]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lambda: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        let d = TrainConfig::with_diffusion(DiffusionConfig::default());
        assert_eq!(d.epochs, 600);
        assert_eq!(d.diffusion.unwrap().steps, 10);
    }
}
