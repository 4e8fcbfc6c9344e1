use rand::seq::SliceRandom;

use super::{LinearParams, ModelParams};
use crate::rng;

/// Weighted hinge loss with L2 penalty, minimized by stochastic subgradient
/// steps of size `1 / (lambda * t)`. The bias is a constant unit column and
/// is penalized with the weights.
pub(super) fn train(cols: &[Vec<f64>], labels: &[u8], weights: &[f64], params: &LinearParams, seed: u64) -> ModelParams {
    let n = labels.len();
    let m = cols.len();
    // Last slot is the bias.
    let mut w = vec![0.0; m + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, "linear-margin");
    let mut t = 0usize;
    for _ in 0..params.epochs {
        order.shuffle(&mut r);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let y = if labels[i] == 1 { 1.0 } else { -1.0 };
            let score = w[m] + (0..m).map(|j| w[j] * cols[j][i]).sum::<f64>();
            let decay = 1.0 - eta * params.lambda;
            w.iter_mut().for_each(|wj| *wj *= decay);
            if y * score < 1.0 {
                let step = eta * weights[i] * y;
                for j in 0..m {
                    w[j] += step * cols[j][i];
                }
                w[m] += step;
            }
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    ModelParams::LinearMargin { weights: w, bias }
}
