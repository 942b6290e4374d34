//! Bipartite user-item graph and its degree-normalized propagation operator.
//!
//! Nodes are laid out users first (`0..num_users`) then items
//! (`num_users..num_users + num_items`), so a single compressed-row operator carries
//! both the user-side and the item-side aggregation.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, Pair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    num_users: usize,
    num_items: usize,
    user_neighbors: Vec<Vec<usize>>,
    item_neighbors: Vec<Vec<usize>>,
}

impl InteractionGraph {
    /// Builds the graph from the train interactions only.
    pub fn build(ds: &InteractionDataset) -> Self {
        Self::from_pairs(ds.num_users, ds.num_items, &ds.train)
    }

    pub fn from_pairs(num_users: usize, num_items: usize, pairs: &[Pair]) -> Self {
        let mut user_neighbors = vec![Vec::new(); num_users];
        let mut item_neighbors = vec![Vec::new(); num_items];
        for &(u, i) in pairs {
            user_neighbors[u].push(i);
            item_neighbors[i].push(u);
        }
        for list in user_neighbors.iter_mut().chain(item_neighbors.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        InteractionGraph {
            num_users,
            num_items,
            user_neighbors,
            item_neighbors,
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

    pub fn num_interactions(&self) -> usize {
        self.user_neighbors.iter().map(Vec::len).sum()
    }

    /// Sorted item ids of user `u` (N_u).
    pub fn items_of(&self, u: usize) -> &[usize] {
        &self.user_neighbors[u]
    }

    /// Sorted user ids of item `i` (N_i).
    pub fn users_of(&self, i: usize) -> &[usize] {
        &self.item_neighbors[i]
    }

    pub fn user_degree(&self, u: usize) -> usize {
        self.user_neighbors[u].len()
    }

    pub fn item_degree(&self, i: usize) -> usize {
        self.item_neighbors[i].len()
    }

    pub fn has_interaction(&self, u: usize, i: usize) -> bool {
        self.user_neighbors[u].binary_search(&i).is_ok()
    }

    /// Degree of a node in the joint (users then items) numbering.
    pub fn node_degree(&self, node: usize) -> usize {
        if node < self.num_users {
            self.user_degree(node)
        } else {
            self.item_degree(node - self.num_users)
        }
    }

    fn node_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (list, offset) = if node < self.num_users {
            (&self.user_neighbors[node], self.num_users)
        } else {
            (&self.item_neighbors[node - self.num_users], 0)
        };
        list.iter().map(move |&n| n + offset)
    }
}

/// Which endpoint degrees enter an edge coefficient.
///
/// For an edge written into row `target` from column `source`: `Left` divides by the
/// target's degree, `Right` by the source's, `Symmetric` by both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Degree to the power 1.
    L1,
    /// Degree to the power 1/2.
    Sqrt,
}

impl Norm {
    fn apply(self, degree: usize) -> f64 {
        let d = degree as f64;
        match self {
            Norm::L1 => 1.0 / d,
            Norm::Sqrt => 1.0 / d.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormScheme {
    pub side: Side,
    pub norm: Norm,
}

impl NormScheme {
    /// Symmetric square-root normalization, the LightGCN default.
    pub const LIGHTGCN: NormScheme = NormScheme { side: Side::Symmetric, norm: Norm::Sqrt };

    /// The six ablation variants, in table order: L1-L, L1-R, L1, L, R, default.
    pub const ALL: [NormScheme; 6] = [
        NormScheme { side: Side::Left, norm: Norm::L1 },
        NormScheme { side: Side::Right, norm: Norm::L1 },
        NormScheme { side: Side::Symmetric, norm: Norm::L1 },
        NormScheme { side: Side::Left, norm: Norm::Sqrt },
        NormScheme { side: Side::Right, norm: Norm::Sqrt },
        NormScheme::LIGHTGCN,
    ];

    pub fn is_symmetric(self) -> bool {
        self.side == Side::Symmetric
    }

    /// Short flag form: `l1-l`, `l1-r`, `l1`, `l`, `r`, `sym`.
    pub fn short_name(self) -> &'static str {
        match (self.norm, self.side) {
            (Norm::L1, Side::Left) => "l1-l",
            (Norm::L1, Side::Right) => "l1-r",
            (Norm::L1, Side::Symmetric) => "l1",
            (Norm::Sqrt, Side::Left) => "l",
            (Norm::Sqrt, Side::Right) => "r",
            (Norm::Sqrt, Side::Symmetric) => "sym",
        }
    }

    pub fn coefficient(self, target_degree: usize, source_degree: usize) -> f64 {
        match self.side {
            Side::Left => self.norm.apply(target_degree),
            Side::Right => self.norm.apply(source_degree),
            Side::Symmetric => self.norm.apply(target_degree * source_degree),
        }
    }
}

impl Default for NormScheme {
    fn default() -> Self {
        NormScheme::LIGHTGCN
    }
}

impl fmt::Display for NormScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match (self.norm, self.side) {
            (Norm::Sqrt, Side::Symmetric) => "",
            (Norm::L1, Side::Left) => "-L1-L",
            (Norm::L1, Side::Right) => "-L1-R",
            (Norm::L1, Side::Symmetric) => "-L1",
            (Norm::Sqrt, Side::Left) => "-L",
            (Norm::Sqrt, Side::Right) => "-R",
        };
        write!(f, "LightGCN{suffix}")
    }
}

impl FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("lightgcn").unwrap_or(&key);
        let key = key.strip_prefix('-').unwrap_or(key);
        match key {
            "" | "sym" | "sym-sqrt" | "default" => return Ok(NormScheme::LIGHTGCN),
            _ => {}
        }
        NormScheme::ALL
            .into_iter()
            .find(|scheme| scheme.short_name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown normalization scheme {s:?}")))
    }
}

/// Sparse weighted operator over all `num_users + num_items` nodes in compressed-row form.
///
/// Row `v` holds the coefficients used to aggregate into node `v`:
/// `y[v] = sum_w weight(v, w) * x[w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    num_users: usize,
    num_nodes: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    scheme: NormScheme,
    symmetric: bool,
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn nnz(&self) -> usize {
        self.weights.len()
    }

    pub fn scheme(&self) -> NormScheme {
        self.scheme
    }

    /// Whether the operator equals its own transpose.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[v]..self.row_ptr[v + 1];
        self.cols[span.clone()].iter().copied().zip(self.weights[span].iter().copied())
    }

    /// Coefficient at `(row, col)`, zero when there is no edge.
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[span.clone()].binary_search(&col) {
            Ok(k) => self.weights[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x` for an `n x d` row-major matrix.
    pub fn spmv(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut y = Array2::zeros(x.raw_dim());
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &Array2<f64>, y: &mut Array2<f64>) -> Result<()> {
        if x.nrows() != self.num_nodes || y.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.num_nodes),
                actual: format!("input {:?}, output {:?}", x.dim(), y.dim()),
            });
        }
        let d = x.ncols();
        let x_std = x.as_standard_layout();
        let xs = x_std.as_slice().expect("standard layout");
        let ys = y.as_slice_mut().expect("freshly allocated output is contiguous");
        for v in 0..self.num_nodes {
            let out = &mut ys[v * d..(v + 1) * d];
            out.fill(0.0);
            for k in self.row_ptr[v]..self.row_ptr[v + 1] {
                let w = self.weights[k];
                let src = &xs[self.cols[k] * d..(self.cols[k] + 1) * d];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        Ok(())
    }

    /// Explicit transpose. For symmetric operators this is a plain copy.
    pub fn transpose(&self) -> NormalizedAdjacency {
        if self.symmetric {
            return self.clone();
        }
        let n = self.num_nodes;
        let mut counts = vec![0usize; n + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for v in 0..n {
            counts[v + 1] += counts[v];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0; self.nnz()];
        let mut weights = vec![0.0; self.nnz()];
        // rows visited in ascending order keep every transposed row sorted
        for v in 0..n {
            for (c, w) in self.row(v) {
                let slot = next[c];
                cols[slot] = v;
                weights[slot] = w;
                next[c] += 1;
            }
        }
        NormalizedAdjacency {
            num_users: self.num_users,
            num_nodes: n,
            row_ptr,
            cols,
            weights,
            scheme: self.scheme,
            symmetric: false,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.num_nodes, self.num_nodes));
        for v in 0..self.num_nodes {
            for (c, w) in self.row(v) {
                dense[[v, c]] = w;
            }
        }
        dense
    }

    /// Writes `row col weight` triples, one per line.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for v in 0..self.num_nodes {
            for (c, w) in self.row(v) {
                writeln!(out, "{v} {c} {w}").map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Degree-normalized operator for `scheme`. Edge weights are computed once.
pub fn normalize(g: &InteractionGraph, scheme: NormScheme) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * g.num_interactions());
    let mut weights = Vec::with_capacity(2 * g.num_interactions());
    row_ptr.push(0);
    for v in 0..n {
        let dv = g.node_degree(v);
        for w in g.node_neighbors(v) {
            let dw = g.node_degree(w);
            debug_assert!(dv > 0 && dw > 0, "edge endpoint with zero degree");
            cols.push(w);
            weights.push(scheme.coefficient(dv, dw));
        }
        row_ptr.push(cols.len());
    }
    NormalizedAdjacency {
        num_users: g.num_users(),
        num_nodes: n,
        row_ptr,
        cols,
        weights,
        scheme,
        symmetric: scheme.is_symmetric(),
    }
}

/// Symmetric square-root normalization of `A + I` (degrees counted with the loop),
/// the operator of the original personalized-propagation formulation.
pub fn normalize_with_self_loops(g: &InteractionGraph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    row_ptr.push(0);
    let inv_sqrt = |v: usize| 1.0 / ((g.node_degree(v) + 1) as f64).sqrt();
    for v in 0..n {
        let mut entries: Vec<(usize, f64)> = g
            .node_neighbors(v)
            .map(|w| (w, inv_sqrt(v) * inv_sqrt(w)))
            .collect();
        entries.push((v, inv_sqrt(v) * inv_sqrt(v)));
        entries.sort_unstable_by_key(|e| e.0);
        for (c, w) in entries {
            cols.push(c);
            weights.push(w);
        }
        row_ptr.push(cols.len());
    }
    NormalizedAdjacency {
        num_users: g.num_users(),
        num_nodes: n,
        row_ptr,
        cols,
        weights,
        scheme: NormScheme::LIGHTGCN,
        symmetric: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> InteractionGraph {
        InteractionGraph::from_pairs(2, 2, &[(0, 0), (0, 1), (1, 0)])
    }

    #[test]
    fn degrees_and_symmetry() {
        let g = toy();
        assert_eq!((g.user_degree(0), g.user_degree(1)), (2, 1));
        assert_eq!((g.item_degree(0), g.item_degree(1)), (2, 1));
        for u in 0..2 {
            for &i in g.items_of(u) {
                assert!(g.users_of(i).contains(&u));
            }
        }
    }

    #[test]
    fn test_pairs_never_enter_the_graph() {
        let with_test =
            InteractionDataset::from_pairs(2, 2, vec![(0, 0), (0, 1), (1, 0)], vec![(1, 1)]).unwrap();
        assert_eq!(InteractionGraph::build(&with_test), toy());
    }

    #[test]
    fn symmetric_sqrt_weights() {
        let adj = normalize(&toy(), NormScheme::LIGHTGCN);
        let (u0, u1, i0, i1) = (0, 1, 2, 3);
        assert_eq!(adj.weight(u0, i0), 0.5);
        assert!((adj.weight(u0, i1) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((adj.weight(u1, i0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(adj.weight(u0, u1), 0.0);
        assert_eq!(adj.weight(i0, i0), 0.0);
        assert_eq!(adj.nnz(), 6);
    }

    #[test]
    fn single_edge_has_unit_weight_under_every_scheme() {
        let g = InteractionGraph::from_pairs(1, 1, &[(0, 0)]);
        for scheme in NormScheme::ALL {
            let adj = normalize(&g, scheme);
            assert_eq!(adj.weight(0, 1), 1.0, "{scheme}");
            assert_eq!(adj.weight(1, 0), 1.0, "{scheme}");
        }
    }

    #[test]
    fn left_l1_divides_by_target_degree() {
        let adj = normalize(&toy(), NormScheme { side: Side::Left, norm: Norm::L1 });
        assert_eq!(adj.weight(0, 2), 0.5);
        assert_eq!(adj.weight(0, 3), 0.5);
        assert_eq!(adj.weight(1, 2), 1.0);
        for v in 0..4 {
            let sum: f64 = adj.row(v).map(|(_, w)| w).sum();
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn left_and_right_are_transposes() {
        let g = toy();
        for norm in [Norm::L1, Norm::Sqrt] {
            let left = normalize(&g, NormScheme { side: Side::Left, norm });
            let right = normalize(&g, NormScheme { side: Side::Right, norm });
            assert_eq!(left.transpose().to_dense(), right.to_dense());
            assert!(!left.is_symmetric());
        }
    }

    #[test]
    fn spmv_examples() {
        let g = InteractionGraph::from_pairs(1, 1, &[(0, 0)]);
        let adj = normalize(&g, NormScheme::LIGHTGCN);
        let y = adj.spmv(&array![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(y.row(0).to_vec(), vec![1.0, 0.0]);

        let adj = normalize(&toy(), NormScheme::LIGHTGCN);
        let x = array![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let y = adj.spmv(&x).unwrap();
        assert_eq!(y[[0, 0]], 0.5);
        assert!((y[[0, 1]] - 0.70711).abs() < 1e-5);
        assert!(adj.spmv(&Array2::zeros((4, 3))).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(adj.spmv(&Array2::zeros((3, 2))), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn self_loop_operator_is_symmetric_with_diagonal() {
        let adj = normalize_with_self_loops(&toy());
        let dense = adj.to_dense();
        assert_eq!(dense, dense.t());
        assert!((adj.weight(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((adj.weight(1, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scheme_names_round_trip() {
        for scheme in NormScheme::ALL {
            assert_eq!(scheme.to_string().parse::<NormScheme>().unwrap(), scheme);
            assert_eq!(scheme.short_name().parse::<NormScheme>().unwrap(), scheme);
        }
        assert_eq!(NormScheme::LIGHTGCN.to_string(), "LightGCN");
        assert!("l2".parse::<NormScheme>().is_err());
    }

    #[test]
    fn dump_lists_every_edge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.txt");
        normalize(&toy(), NormScheme::LIGHTGCN).dump(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("0 2 0.5\n"));
    }
}
