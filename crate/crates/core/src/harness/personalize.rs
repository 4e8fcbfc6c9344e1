//! Personalization study: leave-one-subject-out models with and without the
//! held-out subject's first half, tested on that subject's second half.

use serde::{Deserialize, Serialize};

use super::collect::DecisionRecord;
use super::config::LabelSource;
use super::offline::labels_from_log;
use super::{ExperimentConfig, SubjectData};
use crate::error::{Error, Result};
use crate::models::{self, roc_auc, roc_curve, Dataset, EvalMetrics, LabeledSample};
use crate::rng;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectComparison {
    pub subject_id: String,
    pub personal_samples: usize,
    pub test_samples: usize,
    /// Latest personalization sample.
    pub personal_end: Timestamp,
    /// Earliest test sample.
    pub test_start: Timestamp,
    pub plain: EvalMetrics,
    pub personalized: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalizationReport {
    pub label_source: LabelSource,
    pub subjects: Vec<SubjectComparison>,
    /// Subjects left out, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Metrics over every tested sample of every subject.
    pub plain: EvalMetrics,
    pub personalized: EvalMetrics,
    pub plain_roc: Vec<(f64, f64)>,
    pub personalized_roc: Vec<(f64, f64)>,
}

impl PersonalizationReport {
    pub fn plain_auc(&self) -> f64 {
        self.plain.auc_roc.unwrap_or(f64::NAN)
    }

    pub fn personalized_auc(&self) -> f64 {
        self.personalized.auc_roc.unwrap_or(f64::NAN)
    }

    pub fn auc_gap(&self) -> f64 {
        self.personalized_auc() - self.plain_auc()
    }
}

/// Time-ordered labeled samples per subject from the chosen source.
/// Collected labels come from the statistical-collection records in `log`.
pub fn study_labels(
    subjects: &[SubjectData],
    source: LabelSource,
    log: Option<&[DecisionRecord]>,
) -> Result<Vec<Vec<LabeledSample>>> {
    subjects
        .iter()
        .map(|s| match source {
            LabelSource::Oracle => s
                .valid()
                .map(|(b, f)| {
                    let l = if b.stress { 5 } else { 1 };
                    let mut f = f.clone();
                    f.label = Some(l);
                    LabeledSample::new(f, l)
                })
                .collect(),
            LabelSource::Collected => {
                let log = log.ok_or_else(|| Error::Experiment("collected labels need a decision log".into()))?;
                labels_from_log(s, log)
            }
        })
        .collect()
}

/// Time-ordered first and second halves of one subject's samples.
pub fn temporal_halves(samples: &[LabeledSample]) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let mut own = samples.to_vec();
    own.sort_by_key(|x| x.features.timestamp);
    let second = own.split_off(own.len() / 2);
    (own, second)
}

fn single_class(samples: &[LabeledSample]) -> bool {
    let pos = samples.iter().filter(|s| s.label2 == 1).count();
    pos == 0 || pos == samples.len()
}

pub fn personalization_study(
    subjects: &[SubjectData],
    config: &ExperimentConfig,
    labels: &[Vec<LabeledSample>],
) -> Result<PersonalizationReport> {
    if labels.len() != subjects.len() {
        return Err(Error::Parameter(format!("{} label sets for {} subjects", labels.len(), subjects.len())));
    }
    let set = config.feature_set;
    let mut comparisons = Vec::new();
    let mut skipped = Vec::new();
    let (mut plain_scores, mut pers_scores, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    for (i, s) in subjects.iter().enumerate() {
        let (first, second) = temporal_halves(&labels[i]);
        let (first, second) = (first.as_slice(), second.as_slice());
        if first.is_empty() || single_class(first) || single_class(second) {
            log::warn!("{}: a half of its {} labels holds a single class; skipped", s.subject_id(), labels[i].len());
            skipped.push((s.subject_id().to_string(), "a half holds a single class".to_string()));
            continue;
        }
        let others: Vec<LabeledSample> = labels
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, l)| l.iter().cloned())
            .collect();
        let seed = rng::derive_indexed(config.seed, "personalization", i as u64);
        let base = Dataset::from_samples(&others, set)?;
        let plain = models::train_matrix(&base, &config.classifier, seed)?;
        let mut with_own = base;
        with_own.extend_weighted(&Dataset::from_samples(first, set)?, config.personalization.personal_weight)?;
        let personalized = models::train_matrix(&with_own, &config.classifier, seed)?;

        let rows: Vec<Vec<f64>> = second.iter().map(|x| x.features.values(set)).collect();
        let y: Vec<u8> = second.iter().map(|x| x.label2).collect();
        let ps: Vec<f64> = rows.iter().map(|r| plain.predict_proba_row(r)).collect::<Result<_>>()?;
        let qs: Vec<f64> = rows.iter().map(|r| personalized.predict_proba_row(r)).collect::<Result<_>>()?;
        comparisons.push(SubjectComparison {
            subject_id: s.subject_id().to_string(),
            personal_samples: first.len(),
            test_samples: second.len(),
            personal_end: first[first.len() - 1].features.timestamp,
            test_start: second[0].features.timestamp,
            plain: EvalMetrics::from_scores(&ps, &y),
            personalized: EvalMetrics::from_scores(&qs, &y),
        });
        plain_scores.extend(ps);
        pers_scores.extend(qs);
        truth.extend(y);
    }
    if comparisons.len() < 3 {
        return Err(Error::Experiment(format!(
            "personalization needs at least 3 subjects with both classes in each half, found {}",
            comparisons.len()
        )));
    }
    roc_auc(&plain_scores, &truth)?;
    Ok(PersonalizationReport {
        label_source: config.personalization.labels,
        subjects: comparisons,
        skipped,
        plain: EvalMetrics::from_scores(&plain_scores, &truth),
        personalized: EvalMetrics::from_scores(&pers_scores, &truth),
        plain_roc: roc_curve(&plain_scores, &truth)?,
        personalized_roc: roc_curve(&pers_scores, &truth)?,
    })
}
