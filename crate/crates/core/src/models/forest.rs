use rand::Rng;

use super::tree::{Columns, GiniGrower};
use super::ModelParams;
use super::ForestParams;
use crate::rng;

/// Bootstrap-aggregated Gini trees. Bootstrap multiplicities enter as sample
/// weights, so each tree sees the distinct drawn samples once.
pub(super) fn train(cols: &[Vec<f64>], labels: &[u8], weights: &[f64], params: &ForestParams, seed: u64) -> ModelParams {
    let n = labels.len();
    let m = cols.len();
    let mtry = params
        .features_per_node
        .unwrap_or_else(|| ((m as f64).sqrt().round() as usize).max(1));
    let trees = (0..params.trees)
        .map(|t| {
            let mut r = rng::indexed_stream(seed, "forest-tree", t as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[r.random_range(0..n)] += 1;
            }
            let w: Vec<f64> = counts.iter().zip(weights).map(|(&c, &w)| f64::from(c) * w).collect();
            let idx: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
            GiniGrower {
                cols: Columns { cols },
                labels,
                weights: &w,
                max_depth: params.max_depth,
                mtry: Some(mtry),
                rng: &mut r,
            }
            .grow(idx)
        })
        .collect();
    ModelParams::BaggedTrees { trees }
}
