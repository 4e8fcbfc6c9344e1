//! Axis-aligned binary trees stored as flat node arrays.
//!
//! Two growers share the representation: a weighted-Gini classifier used by
//! the bagged ensemble, and a second-order regression grower used by the
//! boosted ensemble. Both scan candidate features in ascending index order
//! and thresholds in ascending order, replacing the incumbent split only on
//! strict improvement, so ties resolve to the lowest feature and threshold.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Leaf value reached by `x`; `x[feature] <= threshold` goes left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left as usize).max(go(nodes, *right as usize)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }
}

/// Column-major view of a feature matrix.
pub(crate) struct Columns<'a> {
    pub cols: &'a [Vec<f64>],
}

impl Columns<'_> {
    fn n_features(&self) -> usize {
        self.cols.len()
    }

    fn sorted_by(&self, feature: usize, idx: &[usize]) -> Vec<(f64, usize)> {
        let col = &self.cols[feature];
        let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (col[i], i)).collect();
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        pairs
    }
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

fn partition(cols: &Columns<'_>, idx: &[usize], feature: usize, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    idx.iter().partition(|&&i| cols.cols[feature][i] <= threshold)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Guard against the midpoint rounding up onto `b`.
    if m >= b {
        a
    } else {
        m
    }
}

fn gini(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        0.0
    } else {
        w - (w0 * w0 + w1 * w1) / w
    }
}

/// Weighted-Gini classification tree. Leaves hold the weighted fraction of
/// class 1. `mtry` limits each node to a random feature subset.
pub(crate) struct GiniGrower<'a, R: Rng> {
    pub cols: Columns<'a>,
    pub labels: &'a [u8],
    pub weights: &'a [f64],
    pub max_depth: usize,
    pub mtry: Option<usize>,
    pub rng: &'a mut R,
}

impl<R: Rng> GiniGrower<'_, R> {
    pub fn grow(mut self, idx: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.node(&mut nodes, idx, 0);
        Tree { nodes }
    }

    fn class_weights(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(w0, w1), &i| {
            if self.labels[i] == 1 {
                (w0, w1 + self.weights[i])
            } else {
                (w0 + self.weights[i], w1)
            }
        })
    }

    fn node(&mut self, nodes: &mut Vec<Node>, idx: Vec<usize>, depth: usize) -> u32 {
        let id = nodes.len() as u32;
        let (w0, w1) = self.class_weights(&idx);
        let leaf_value = if w0 + w1 > 0.0 { w1 / (w0 + w1) } else { 0.0 };
        nodes.push(Node::Leaf { value: leaf_value });
        if depth >= self.max_depth || w0 <= 0.0 || w1 <= 0.0 || idx.len() < 2 {
            return id;
        }
        let parent = gini(w0, w1);
        let Some(best) = self.best_split(&idx, parent) else {
            return id;
        };
        let (l, r) = partition(&self.cols, &idx, best.feature, best.threshold);
        let left = self.node(nodes, l, depth + 1);
        let right = self.node(nodes, r, depth + 1);
        nodes[id as usize] = Node::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn features(&mut self) -> Vec<usize> {
        let m = self.cols.n_features();
        match self.mtry {
            Some(k) if k < m => {
                let mut f = sample(self.rng, m, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..m).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize], parent: f64) -> Option<BestSplit> {
        let mut best: Option<BestSplit> = None;
        let (t0, t1) = self.class_weights(idx);
        for f in self.features() {
            let pairs = self.cols.sorted_by(f, idx);
            let (mut l0, mut l1) = (0.0, 0.0);
            for j in 0..pairs.len() - 1 {
                let i = pairs[j].1;
                if self.labels[i] == 1 {
                    l1 += self.weights[i];
                } else {
                    l0 += self.weights[i];
                }
                if pairs[j].0 == pairs[j + 1].0 {
                    continue;
                }
                let score = gini(l0, l1) + gini(t0 - l0, t1 - l1);
                if best.as_ref().map_or(true, |b| score < b.score) {
                    best = Some(BestSplit {
                        score,
                        feature: f,
                        threshold: midpoint(pairs[j].0, pairs[j + 1].0),
                    });
                }
            }
        }
        best.filter(|b| b.score < parent - 1e-12 * parent.abs().max(1.0))
    }
}

/// Second-order regression tree on gradient/hessian pairs with L2 leaf
/// regularization. Leaves hold the Newton step `-G / (H + lambda)`.
pub(crate) struct NewtonGrower<'a> {
    pub cols: Columns<'a>,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_hess: f64,
}

impl NewtonGrower<'_> {
    pub fn grow(&self, idx: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.node(&mut nodes, idx, 0);
        Tree { nodes }
    }

    fn sums(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]))
    }

    fn node(&self, nodes: &mut Vec<Node>, idx: Vec<usize>, depth: usize) -> u32 {
        let id = nodes.len() as u32;
        let (g, h) = self.sums(&idx);
        nodes.push(Node::Leaf {
            value: -g / (h + self.lambda),
        });
        if depth >= self.max_depth || idx.len() < 2 {
            return id;
        }
        let parent = g * g / (h + self.lambda);
        let mut best: Option<BestSplit> = None;
        for f in 0..self.cols.n_features() {
            let pairs = self.cols.sorted_by(f, &idx);
            let (mut gl, mut hl) = (0.0, 0.0);
            for j in 0..pairs.len() - 1 {
                let i = pairs[j].1;
                gl += self.grad[i];
                hl += self.hess[i];
                if pairs[j].0 == pairs[j + 1].0 {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.min_child_hess || hr < self.min_child_hess {
                    continue;
                }
                // Negated gain so that "smaller is better" matches the Gini grower.
                let score = -(gl * gl / (hl + self.lambda) + gr * gr / (hr + self.lambda));
                if best.as_ref().map_or(true, |b| score < b.score) {
                    best = Some(BestSplit {
                        score,
                        feature: f,
                        threshold: midpoint(pairs[j].0, pairs[j + 1].0),
                    });
                }
            }
        }
        let Some(best) = best.filter(|b| -b.score > parent + 1e-12) else {
            return id;
        };
        let (l, r) = partition(&self.cols, &idx, best.feature, best.threshold);
        let left = self.node(nodes, l, depth + 1);
        let right = self.node(nodes, r, depth + 1);
        nodes[id as usize] = Node::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}
