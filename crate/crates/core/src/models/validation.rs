//! Stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::EvalMetrics;
use super::{train_matrix, ClassifierConfig, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// Fold index for every sample.
///
/// Each class is shuffled separately, the classes are concatenated and
/// positions are dealt round-robin, so fold sizes differ by at most one and
/// every fold receives its share of each class.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[usize::from(l == 1)].push(i);
    }
    let minority = by_class[0].len().min(by_class[1].len());
    if minority < k {
        return Err(Error::Stratification(format!(
            "minority class has {minority} samples, fewer than k = {k}"
        )));
    }
    let mut r = rng::stream(seed, "stratified-folds");
    let mut folds = vec![0; labels.len()];
    let mut pos = 0;
    for class in &mut by_class {
        class.shuffle(&mut r);
        for &i in class.iter() {
            folds[i] = pos % k;
            pos += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Mean over folds where AUC was defined.
    pub auc_roc: Option<f64>,
}

impl MeanMetrics {
    pub fn of(folds: &[EvalMetrics]) -> Self {
        let n = folds.len() as f64;
        let aucs: Vec<f64> = folds.iter().filter_map(|m| m.auc_roc).collect();
        MeanMetrics {
            f1: folds.iter().map(|m| m.f1).sum::<f64>() / n,
            precision: folds.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: folds.iter().map(|m| m.recall).sum::<f64>() / n,
            auc_roc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<EvalMetrics>,
    pub mean: MeanMetrics,
}

/// Train on k-1 folds, test on the remaining one, for each fold.
pub fn kfold_evaluate(data: &Dataset, config: &ClassifierConfig, k: usize, seed: u64) -> Result<CvReport> {
    let folds = stratified_folds(&data.labels, k, seed)?;
    let mut results = Vec::with_capacity(k);
    for fold in 0..k {
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != fold).collect();
        let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == fold).collect();
        let train = data.subset(&train_idx);
        let model = train_matrix(&train, config, rng::derive_indexed(seed, "fold", fold as u64))?;
        let scores: Vec<f64> = test_idx
            .iter()
            .map(|&i| model.predict_proba_row(&data.rows[i]))
            .collect::<Result<_>>()?;
        let labels: Vec<u8> = test_idx.iter().map(|&i| data.labels[i]).collect();
        results.push(EvalMetrics::from_scores(&scores, &labels));
    }
    Ok(CvReport {
        mean: MeanMetrics::of(&results),
        folds: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(folds: &[usize], k: usize) -> Vec<usize> {
        (0..k).map(|f| folds.iter().filter(|&&x| x == f).count()).collect()
    }

    #[test]
    fn divisible_sizes() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 4 == 0)).collect();
        let folds = stratified_folds(&labels, 4, 1).unwrap();
        assert_eq!(sizes(&folds, 4), vec![25; 4]);
        for f in 0..4 {
            let pos = (0..100).filter(|&i| folds[i] == f && labels[i] == 1).count();
            assert!((6..=7).contains(&pos));
        }
    }

    #[test]
    fn uneven_sizes() {
        let labels: Vec<u8> = (0..102).map(|i| u8::from(i % 3 == 0)).collect();
        let folds = stratified_folds(&labels, 4, 9).unwrap();
        assert_eq!(folds.len(), 102);
        assert!(sizes(&folds, 4).iter().all(|s| (25..=26).contains(s)));
    }

    #[test]
    fn too_few_minority_samples() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1];
        assert!(matches!(stratified_folds(&labels, 4, 0), Err(Error::Stratification(_))));
    }
}
