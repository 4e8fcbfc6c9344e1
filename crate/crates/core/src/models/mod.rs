//! Binary stress classifiers: bagged Gini trees, boosted Newton trees on the
//! logistic loss, and a hinge-loss linear margin model.
//!
//! All backends train on min-max scaled columns (bounds fitted on the
//! training set), up-weight the minority class by inverse frequency, and are
//! deterministic given a seed.

mod boosting;
mod forest;
mod linear;
pub mod metrics;
pub mod tree;
pub mod validation;

pub use metrics::{roc_auc, roc_curve, Confusion, EvalMetrics};
pub use validation::{kfold_evaluate, stratified_folds, CvReport, MeanMetrics};

use serde::{Deserialize, Serialize};

use crate::dsp::MinMaxBounds;
use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureSignature, FeatureVector};
use tree::Tree;

/// Map a 1..=5 self-report to stressed (4, 5) or not stressed (1..=3).
pub fn binarize_label(label5: u8) -> Result<u8> {
    match label5 {
        1..=3 => Ok(0),
        4 | 5 => Ok(1),
        other => Err(Error::Parameter(format!("stress label {other} outside 1..=5"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label5: u8,
    pub label2: u8,
}

impl LabeledSample {
    pub fn new(features: FeatureVector, label5: u8) -> Result<Self> {
        let label2 = binarize_label(label5)?;
        Ok(Self {
            features,
            label5,
            label2,
        })
    }

    /// Use the label carried by the feature vector, if any.
    pub fn from_labeled(features: FeatureVector) -> Option<Result<Self>> {
        features.label.map(|l| Self::new(features, l))
    }
}

/// Row-major training matrix with binary labels and per-sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
    pub signature: FeatureSignature,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, signature: FeatureSignature) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Parameter(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != signature.arity()) {
            return Err(Error::Compatibility(format!(
                "row of arity {} does not match signature arity {}",
                r.len(),
                signature.arity()
            )));
        }
        let weights = vec![1.0; rows.len()];
        Ok(Self {
            rows,
            labels,
            weights,
            signature,
        })
    }

    pub fn from_samples(samples: &[LabeledSample], set: FeatureSet) -> Result<Self> {
        Self::new(
            samples.iter().map(|s| s.features.values(set)).collect(),
            samples.iter().map(|s| s.label2).collect(),
            set.signature(),
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            signature: self.signature.clone(),
        }
    }

    /// Append `other`, scaling its sample weights by `weight`.
    pub fn extend_weighted(&mut self, other: &Dataset, weight: f64) -> Result<()> {
        self.signature.check(&other.signature)?;
        self.rows.extend(other.rows.iter().cloned());
        self.labels.extend_from_slice(&other.labels);
        self.weights.extend(other.weights.iter().map(|w| w * weight));
        Ok(())
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.len() - pos, pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    BaggedTrees,
    BoostedTrees,
    LinearMargin,
}

impl Backend {
    pub fn tag(self) -> &'static str {
        match self {
            Backend::BaggedTrees => "bagged_trees",
            Backend::BoostedTrees => "boosted_trees",
            Backend::LinearMargin => "linear_margin",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bagged_trees" | "bagged" | "forest" => Ok(Backend::BaggedTrees),
            "boosted_trees" | "boosted" => Ok(Backend::BoostedTrees),
            "linear_margin" | "linear" => Ok(Backend::LinearMargin),
            other => Err(Error::Parameter(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    /// Features tried per node; `None` uses round(sqrt(m)).
    pub features_per_node: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 5,
            features_per_node: None,
        }
    }
}

impl ForestParams {
    /// The 500-tree ensemble used for the published offline study.
    pub fn paper_scale() -> Self {
        Self {
            trees: 500,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub lambda: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_depth: 3,
            shrinkage: 0.1,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub epochs: usize,
    pub lambda: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            epochs: 50,
            lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub backend: Backend,
    pub forest: ForestParams,
    pub boost: BoostParams,
    pub linear: LinearParams,
    /// Up-weight classes by inverse frequency.
    pub balance_classes: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            backend: Backend::BaggedTrees,
            forest: ForestParams::default(),
            boost: BoostParams::default(),
            linear: LinearParams::default(),
            balance_classes: true,
        }
    }
}

impl ClassifierConfig {
    pub fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    BaggedTrees { trees: Vec<Tree> },
    BoostedTrees { base: f64, shrinkage: f64, trees: Vec<Tree> },
    LinearMargin { weights: Vec<f64>, bias: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub backend: Backend,
    pub signature: FeatureSignature,
    pub bounds: Vec<MinMaxBounds>,
    pub params: ModelParams,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl TrainedClassifier {
    fn scale(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.bounds).map(|(&x, b)| b.transform(x)).collect()
    }

    /// Probability of the stressed class for a raw (unscaled) row.
    pub fn predict_proba_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.signature.arity() {
            return Err(Error::Compatibility(format!(
                "model expects {} features, got {}",
                self.signature.arity(),
                row.len()
            )));
        }
        let x = self.scale(row);
        Ok(match &self.params {
            ModelParams::BaggedTrees { trees } => {
                let votes = trees.iter().filter(|t| t.predict(&x) > 0.5).count();
                votes as f64 / trees.len() as f64
            }
            ModelParams::BoostedTrees {
                base,
                shrinkage,
                trees,
            } => sigmoid(base + shrinkage * trees.iter().map(|t| t.predict(&x)).sum::<f64>()),
            ModelParams::LinearMargin { weights, bias } => {
                sigmoid(bias + weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>())
            }
        })
    }

    /// Probability for a feature vector, after checking the column signature.
    pub fn predict_proba(&self, features: &FeatureVector, set: FeatureSet) -> Result<f64> {
        self.signature.check(&set.signature())?;
        self.predict_proba_row(&features.values(set))
    }
}

/// Per-column bounds on the training rows. Constant columns get a unit range
/// so they scale to zero instead of failing.
fn fit_bounds(data: &Dataset) -> Vec<MinMaxBounds> {
    (0..data.signature.arity())
        .map(|j| {
            let col: Vec<f64> = data.rows.iter().map(|r| r[j]).collect();
            MinMaxBounds::fit(&col).unwrap_or_else(|_| {
                let min = col.first().copied().unwrap_or(0.0);
                MinMaxBounds { min, max: min + 1.0 }
            })
        })
        .collect()
}

fn effective_weights(data: &Dataset, balance: bool) -> Vec<f64> {
    if !balance {
        return data.weights.clone();
    }
    let mut totals = [0.0f64; 2];
    for (&l, &w) in data.labels.iter().zip(&data.weights) {
        totals[usize::from(l)] += w;
    }
    let all = totals[0] + totals[1];
    data.labels
        .iter()
        .zip(&data.weights)
        .map(|(&l, &w)| w * all / (2.0 * totals[usize::from(l)]))
        .collect()
}

/// Train on a prepared matrix.
pub fn train_matrix(data: &Dataset, config: &ClassifierConfig, seed: u64) -> Result<TrainedClassifier> {
    let (neg, pos) = data.class_counts();
    if neg < 2 || pos < 2 {
        return Err(Error::DegenerateTraining(format!(
            "need at least two samples per class, got {neg} negative and {pos} positive"
        )));
    }
    let bounds = fit_bounds(data);
    let cols: Vec<Vec<f64>> = (0..data.signature.arity())
        .map(|j| data.rows.iter().map(|r| bounds[j].transform(r[j])).collect())
        .collect();
    let weights = effective_weights(data, config.balance_classes);
    let params = match config.backend {
        Backend::BaggedTrees => forest::train(&cols, &data.labels, &weights, &config.forest, seed),
        Backend::BoostedTrees => boosting::train(&cols, &data.labels, &weights, &config.boost),
        Backend::LinearMargin => linear::train(&cols, &data.labels, &weights, &config.linear, seed),
    };
    Ok(TrainedClassifier {
        backend: config.backend,
        signature: data.signature.clone(),
        bounds,
        params,
    })
}

/// Train on labeled feature vectors.
pub fn train(
    samples: &[LabeledSample],
    set: FeatureSet,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<TrainedClassifier> {
    train_matrix(&Dataset::from_samples(samples, set)?, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarization() {
        assert_eq!(binarize_label(5).unwrap(), 1);
        assert_eq!(binarize_label(4).unwrap(), 1);
        assert_eq!(binarize_label(3).unwrap(), 0);
        assert_eq!(binarize_label(1).unwrap(), 0);
        assert!(binarize_label(0).is_err());
        assert!(binarize_label(6).is_err());
    }

    #[test]
    fn balanced_weights_equalize_class_mass() {
        let sig = FeatureSignature { names: vec!["x".into()] };
        let d = Dataset::new(vec![vec![0.0]; 4], vec![0, 0, 0, 1], sig).unwrap();
        let w = effective_weights(&d, true);
        let w0: f64 = w[..3].iter().sum();
        assert!((w0 - w[3]).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_degenerate() {
        let sig = FeatureSignature { names: vec!["x".into()] };
        let d = Dataset::new((0..10).map(|i| vec![i as f64]).collect(), vec![1; 10], sig).unwrap();
        for backend in [Backend::BaggedTrees, Backend::BoostedTrees, Backend::LinearMargin] {
            assert!(matches!(
                train_matrix(&d, &ClassifierConfig::with_backend(backend), 0),
                Err(Error::DegenerateTraining(_))
            ));
        }
    }
}
