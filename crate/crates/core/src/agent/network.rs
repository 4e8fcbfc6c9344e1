//! A small fully connected Q-network with manual backpropagation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Hidden and output widths used by the scheduling agent.
pub const DEFAULT_WIDTHS: [usize; 6] = [4, 5, 9, 7, 5, 2];

/// Kernel penalties applied to hidden layers (not biases, not the output layer).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Regularization {
    pub l1: f64,
    pub l2: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self { l1: 1e-2, l2: 1e-2 }
    }
}

impl Regularization {
    pub const NONE: Self = Self { l1: 0.0, l2: 0.0 };
}

/// One training example: network input, index of the action taken, regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Mean squared error plus penalties.
    pub loss: f64,
    /// Mean absolute error of the selected Q-values.
    pub mae: f64,
}

/// Dense network, rectifier hidden layers, linear output.
///
/// All parameters live in one flat vector: for each layer, the row-major
/// `out x in` kernel followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    widths: Vec<usize>,
    regularization: Regularization,
    params: Vec<f64>,
}

impl QNetwork {
    pub fn zeros(widths: &[usize], regularization: Regularization) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Parameter(format!("invalid layer widths {widths:?}")));
        }
        let n = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            widths: widths.to_vec(),
            regularization,
            params: vec![0.0; n],
        })
    }

    /// He-uniform kernels, zero biases.
    pub fn random(widths: &[usize], regularization: Regularization, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(widths, regularization)?;
        let mut off = 0;
        for w in net.widths.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn regularization(&self) -> Regularization {
        self.regularization
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_arity(&self) -> usize {
        self.widths[0]
    }

    pub fn output_arity(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.widths.windows(2).map(move |w| {
            let start = off;
            off += w[0] * w[1] + w[1];
            (start, w[0], w[1])
        })
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Activations of every layer; `acts[0]` is the input mapped from
    /// `[0, 1]` to `[-1, 1]`.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.n_layers() - 1;
        let mut acts = vec![input.iter().map(|x| 2.0 * x - 1.0).collect::<Vec<f64>>()];
        for (l, (off, n_in, n_out)) in self.layers().enumerate() {
            let x = &acts[l];
            let (kernel, bias) = self.params[off..off + n_in * n_out + n_out].split_at(n_in * n_out);
            let mut y: Vec<f64> = (0..n_out)
                .map(|o| bias[o] + kernel[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
                .collect();
            if l < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
        }
        acts
    }

    /// Output values for one input. Fails if the parameters are not finite.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_arity() {
            return Err(Error::Compatibility(format!(
                "network expects {} inputs, got {}",
                self.input_arity(),
                input.len()
            )));
        }
        if let Some(i) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::CorruptedModel(format!("parameter {i} is not finite")));
        }
        Ok(self.activations(input).pop().unwrap_or_default())
    }

    /// First hidden layer in which no unit fires for any of `inputs`.
    ///
    /// Such a layer blocks every gradient, so the output no longer depends on
    /// the input and training cannot recover.
    pub fn dead_layer<'a>(&self, inputs: impl IntoIterator<Item = &'a [f64]>) -> Option<usize> {
        let hidden = self.n_layers() - 1;
        let mut alive = vec![false; hidden];
        for x in inputs {
            let acts = self.activations(x);
            for (l, a) in alive.iter_mut().enumerate() {
                *a |= acts[l + 1].iter().any(|&v| v > 0.0);
            }
        }
        alive.iter().position(|a| !a)
    }

    fn hidden_kernels(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let last = self.n_layers() - 1;
        self.layers()
            .enumerate()
            .filter(move |(l, _)| *l < last)
            .map(|(_, (off, n_in, n_out))| off..off + n_in * n_out)
    }

    pub fn penalty(&self) -> f64 {
        let Regularization { l1, l2 } = self.regularization;
        self.hidden_kernels()
            .flat_map(|r| self.params[r].iter())
            .map(|w| l1 * w.abs() + l2 * w * w)
            .sum()
    }

    /// Batch loss without gradients.
    pub fn loss(&self, batch: &[Example]) -> LossReport {
        let mut se = 0.0;
        let mut ae = 0.0;
        for ex in batch {
            let out = self.activations(&ex.input).pop().unwrap_or_default();
            let err = out[ex.action] - ex.target;
            se += err * err;
            ae += err.abs();
        }
        let n = batch.len().max(1) as f64;
        LossReport {
            loss: se / n + self.penalty(),
            mae: ae / n,
        }
    }

    /// Batch loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &[Example]) -> (LossReport, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let layers: Vec<_> = self.layers().collect();
        let n = batch.len().max(1) as f64;
        let mut se = 0.0;
        let mut ae = 0.0;
        for ex in batch {
            let acts = self.activations(&ex.input);
            let out = &acts[acts.len() - 1];
            let err = out[ex.action] - ex.target;
            se += err * err;
            ae += err.abs();
            let mut delta = vec![0.0; out.len()];
            delta[ex.action] = 2.0 * err / n;
            for (l, &(off, n_in, n_out)) in layers.iter().enumerate().rev() {
                let x = &acts[l];
                for o in 0..n_out {
                    if delta[o] == 0.0 {
                        continue;
                    }
                    let row = off + o * n_in;
                    for i in 0..n_in {
                        grad[row + i] += delta[o] * x[i];
                    }
                    grad[off + n_in * n_out + o] += delta[o];
                }
                if l == 0 {
                    break;
                }
                let mut prev = vec![0.0; n_in];
                for (i, p) in prev.iter_mut().enumerate() {
                    if x[i] > 0.0 {
                        *p = (0..n_out).map(|o| self.params[off + o * n_in + i] * delta[o]).sum();
                    }
                }
                delta = prev;
            }
        }
        let Regularization { l1, l2 } = self.regularization;
        for r in self.hidden_kernels().collect::<Vec<_>>() {
            for k in r {
                let w = self.params[k];
                grad[k] += l1 * sign(w) + 2.0 * l2 * w;
            }
        }
        (
            LossReport {
                loss: se / n + self.penalty(),
                mae: ae / n,
            },
            grad,
        )
    }

    /// Move every parameter toward `online` by `tau`.
    pub fn soft_update_from(&mut self, online: &QNetwork, tau: f64) -> Result<()> {
        if self.widths != online.widths {
            return Err(Error::Compatibility(format!(
                "target widths {:?} differ from online widths {:?}",
                self.widths, online.widths
            )));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Parameter(format!("soft update rate {tau} outside [0, 1]")));
        }
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = (1.0 - tau) * *t + tau * o;
        }
        Ok(())
    }
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl Adam {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&DEFAULT_WIDTHS, Regularization::default()).unwrap();
        assert_eq!(net.forward(&[0.3, 0.2, 0.9, 0.1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_weights_are_rejected() {
        let mut net = QNetwork::zeros(&DEFAULT_WIDTHS, Regularization::default()).unwrap();
        net.params_mut()[3] = f64::NAN;
        assert!(matches!(net.forward(&[0.0; 4]), Err(Error::CorruptedModel(_))));
    }

    #[test]
    fn soft_update_endpoints() {
        let mut r = rng::stream(1, "t");
        let online = QNetwork::random(&DEFAULT_WIDTHS, Regularization::default(), &mut r).unwrap();
        let zero = QNetwork::zeros(&DEFAULT_WIDTHS, Regularization::default()).unwrap();
        let mut t = zero.clone();
        t.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(t, zero);
        t.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(t.params(), online.params());

        let mut ones = zero.clone();
        ones.params_mut().iter_mut().for_each(|p| *p = 1.0);
        let mut t = zero.clone();
        t.soft_update_from(&ones, 0.01).unwrap();
        assert!(t.params().iter().all(|&p| p == 0.01));

        let other = QNetwork::zeros(&[4, 3, 2], Regularization::default()).unwrap();
        assert!(matches!(t.soft_update_from(&other, 0.5), Err(Error::Compatibility(_))));
    }

    #[test]
    fn parameter_count() {
        let net = QNetwork::zeros(&DEFAULT_WIDTHS, Regularization::default()).unwrap();
        assert_eq!(net.params().len(), 4 * 5 + 5 + 5 * 9 + 9 + 9 * 7 + 7 + 7 * 5 + 5 + 5 * 2 + 2);
    }
}
