//! Properties of the APPNP power iteration and its transpose.

use lightgcn::{appnp, appnp_transpose, DiffusionConfig, InteractionGraph};
use ndarray::Array2;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = InteractionGraph> {
    proptest::collection::btree_set((0usize..6, 0usize..7), 1..20).prop_map(|pairs| {
        let pairs: Vec<_> = pairs.into_iter().collect();
        InteractionGraph::from_pairs(6, 7, &pairs)
    })
}

fn matrix(seed: u64) -> Array2<f64> {
    Array2::from_shape_fn((13, 3), |(r, c)| ((r as u64 * 7 + c as u64 * 3 + seed) % 11) as f64 / 5.5 - 1.0)
}

fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn appnp_is_linear(g in graph_strategy(), alpha in 0.0f64..=1.0, steps in 0usize..15, c in -2.0f64..2.0) {
        let cfg = DiffusionConfig { alpha, steps, ..Default::default() };
        let op = cfg.operator(&g);
        let (x, y) = (matrix(1), matrix(4));
        let lhs = appnp(&(&x * c + &y), &op, &cfg).unwrap();
        let rhs = appnp(&x, &op, &cfg).unwrap() * c + appnp(&y, &op, &cfg).unwrap();
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_is_adjoint(g in graph_strategy(), alpha in 0.0f64..=1.0, steps in 0usize..15, self_loops: bool) {
        let cfg = DiffusionConfig { alpha, steps, self_loops, ..Default::default() };
        let op = cfg.operator(&g);
        let (x, y) = (matrix(2), matrix(9));
        let lhs = inner(&appnp(&x, &op, &cfg).unwrap(), &y);
        let rhs = inner(&x, &appnp_transpose(&y, &op, &cfg).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn iterates_approach_fixed_point(g in graph_strategy(), alpha in 0.05f64..0.9) {
        let cfg = DiffusionConfig { alpha, ..Default::default() };
        let op = cfg.operator(&g);
        let z0 = matrix(3);
        let limit = appnp(&z0, &op, &DiffusionConfig { steps: 2000, ..cfg }).unwrap();
        let mut last = f64::INFINITY;
        for steps in [1, 2, 4, 8, 16, 32] {
            let z = appnp(&z0, &op, &DiffusionConfig { steps, ..cfg }).unwrap();
            let err = z.iter().zip(&limit).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= last + 1e-12);
            last = err;
        }
    }
}

#[test]
fn rejects_bad_inputs() {
    let g = InteractionGraph::from_pairs(2, 2, &[(0, 0), (1, 1)]);
    let op = DiffusionConfig::default().operator(&g);
    let bad_alpha = DiffusionConfig { alpha: 1.5, ..Default::default() };
    assert!(appnp(&Array2::zeros((4, 2)), &op, &bad_alpha).is_err());
    assert!(appnp(&Array2::zeros((5, 2)), &op, &DiffusionConfig::default()).is_err());
}
