use super::tree::{Columns, NewtonGrower};
use super::{sigmoid, BoostParams, ModelParams};

/// Additive depth-limited trees fitted to the weighted logistic loss by
/// Newton steps, each shrunk by `params.shrinkage`.
pub(super) fn train(cols: &[Vec<f64>], labels: &[u8], weights: &[f64], params: &BoostParams) -> ModelParams {
    let n = labels.len();
    let (w0, w1) = labels
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(a, b), (&l, &w)| if l == 1 { (a, b + w) } else { (a + w, b) });
    let base = (w1 / w0).ln();
    let mut margin = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = weights[i] * (p - f64::from(labels[i]));
            hess[i] = weights[i] * (p * (1.0 - p)).max(1e-12);
        }
        let tree = NewtonGrower {
            cols: Columns { cols },
            grad: &grad,
            hess: &hess,
            max_depth: params.max_depth,
            lambda: params.lambda,
            min_child_hess: 1e-3,
        }
        .grow((0..n).collect());
        for (m, row) in margin.iter_mut().zip(&rows) {
            *m += params.shrinkage * tree.predict(row);
        }
        trees.push(tree);
    }
    ModelParams::BoostedTrees {
        base,
        shrinkage: params.shrinkage,
        trees,
    }
}
