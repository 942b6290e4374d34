//! APPNP: personalized-PageRank diffusion of the final embeddings by power iteration.
//!
//! `Z(0) = E`, `Z(k+1) = alpha * Z(0) + (1 - alpha) * A Z(k)`. The output transform is the
//! identity, so scores stay plain inner products. The map `Z(0) -> Z(steps)` is linear with
//! Jacobian `J = alpha * sum_{k<steps} (1-alpha)^k A^k + (1-alpha)^steps A^steps`, and its
//! adjoint is the same recurrence run on `A^T`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize, normalize_with_self_loops, InteractionGraph, NormScheme, NormalizedAdjacency};

/// Which LightGCN output seeds the power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionStart {
    /// The layer combination `sum_k alpha_k e^(k)`.
    Combined,
    /// The bare K-th layer `e^(K)`.
    LastLayer,
}

impl FromStr for DiffusionStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combined" => Ok(DiffusionStart::Combined),
            "last-layer" => Ok(DiffusionStart::LastLayer),
            other => Err(Error::InvalidConfig(format!(
                "unknown diffusion start {other:?} (expected combined or last-layer)"
            ))),
        }
    }
}

impl fmt::Display for DiffusionStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffusionStart::Combined => "combined",
            DiffusionStart::LastLayer => "last-layer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    /// Teleport probability.
    pub alpha: f64,
    /// Power-iteration steps.
    pub steps: usize,
    /// Diffuse inside the training forward pass; otherwise only at evaluation time.
    pub apply_during_training: bool,
    pub start: DiffusionStart,
    /// Use `A + I` with renormalized degrees instead of the bare bipartite operator.
    pub self_loops: bool,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            alpha: 0.1,
            steps: 10,
            apply_during_training: true,
            start: DiffusionStart::Combined,
            self_loops: false,
        }
    }
}

impl DiffusionConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        DiffusionConfig { alpha, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "teleport probability must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// The propagation operator diffusion runs on.
    pub fn operator(&self, g: &InteractionGraph) -> NormalizedAdjacency {
        if self.self_loops {
            normalize_with_self_loops(g)
        } else {
            normalize(g, NormScheme::LIGHTGCN)
        }
    }
}

fn check(z: &Array2<f64>, adj: &NormalizedAdjacency, cfg: &DiffusionConfig) -> Result<()> {
    cfg.validate()?;
    if z.nrows() != adj.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows", adj.num_nodes()),
            actual: format!("{} rows", z.nrows()),
        });
    }
    Ok(())
}

fn power_iterate(z0: &Array2<f64>, adj: &NormalizedAdjacency, cfg: &DiffusionConfig) -> Result<Array2<f64>> {
    let mut z = z0.clone();
    let mut az = Array2::zeros(z0.raw_dim());
    let keep = 1.0 - cfg.alpha;
    for _ in 0..cfg.steps {
        adj.spmv_into(&z, &mut az)?;
        ndarray::Zip::from(&mut z)
            .and(&az)
            .and(z0)
            .for_each(|z, &a, &t| *z = cfg.alpha * t + keep * a);
    }
    Ok(z)
}

/// Runs the recurrence `cfg.steps` times from `z0`.
pub fn appnp(z0: &Array2<f64>, adj: &NormalizedAdjacency, cfg: &DiffusionConfig) -> Result<Array2<f64>> {
    check(z0, adj, cfg)?;
    power_iterate(z0, adj, cfg)
}

/// `J^T gbar`: the gradient of the diffused output pulled back to the starting embeddings.
pub fn appnp_transpose(
    gbar: &Array2<f64>,
    adj: &NormalizedAdjacency,
    cfg: &DiffusionConfig,
) -> Result<Array2<f64>> {
    check(gbar, adj, cfg)?;
    if adj.is_symmetric() {
        power_iterate(gbar, adj, cfg)
    } else {
        power_iterate(gbar, &adj.transpose(), cfg)
    }
}

/// Evaluates every candidate teleport probability and returns the best one together with
/// the full `(alpha, score)` table. Ties go to the smaller alpha; NaN scores never win.
pub fn grid_search_alpha<F>(candidates: &[f64], mut evaluate: F) -> Result<(f64, Vec<(f64, f64)>)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("alpha grid is empty".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut table = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for alpha in sorted {
        let score = evaluate(alpha)?;
        table.push((alpha, score));
        let better = match best {
            None => true,
            Some((_, s)) => score > s || (s.is_nan() && !score.is_nan()),
        };
        if better {
            best = Some((alpha, score));
        }
    }
    Ok((best.expect("nonempty grid").0, table))
}
