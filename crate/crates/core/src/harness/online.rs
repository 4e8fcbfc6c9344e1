//! Online study: a pretrained context-aware agent decides in real time for
//! every subject while the classifier retrains on cadence; the collected
//! labels are then scored by cross-validation against the labels of the
//! statistical collection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::collect::{answers_from_log, attach_labels, run_collection, CollectionSpec, DecisionRecord};
use super::offline::{labels_from_log, rates_from_log, statistical_collection, PHASE1_STUDY};
use super::{ExperimentConfig, SubjectData};
use crate::agent::{train_offline, Agent, EpisodeCycle, Observation, OfflineEnv, RewardMode};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::models::{self, kfold_evaluate, CvReport, Dataset, LabeledSample, TrainedClassifier};
use crate::policies::{ModelSlot, PolicyKind, Retrainer};
use crate::rng;

pub const ONLINE_STUDY: &str = "online";

/// Counts for one subject's online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub subject_id: String,
    pub decisions: usize,
    pub prompts: usize,
    pub answered: usize,
    pub labels: usize,
    pub max_daily_prompts: u32,
}

/// Cross-validated metrics for one collection and feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionMetrics {
    pub collection: String,
    pub feature_set: FeatureSet,
    pub samples: usize,
    pub positives: usize,
    pub cv: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub subjects: Vec<SubjectSummary>,
    /// Statistical collection, then online collection, each with PPG-only
    /// and PPG+context features.
    pub metrics: Vec<CollectionMetrics>,
}

impl OnlineReport {
    pub fn get(&self, collection: &str, set: FeatureSet) -> Option<&CollectionMetrics> {
        self.metrics.iter().find(|m| m.collection == collection && m.feature_set == set)
    }
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub log: Vec<DecisionRecord>,
    pub agent: Agent,
    /// Final classifier per subject.
    pub models: Vec<TrainedClassifier>,
    pub retrains: Vec<u32>,
    pub report: OnlineReport,
}

/// Population model for `held_out`: every other subject's collected labels.
fn population_labels(labels: &[Vec<LabeledSample>], held_out: usize) -> Vec<LabeledSample> {
    labels
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .flat_map(|(_, l)| l.iter().cloned())
        .collect()
}

/// One context-aware agent pretrained on every subject's stream in turn,
/// with stress probabilities from leave-one-subject-out population models
/// and response rates from the statistical collection.
pub fn pretrain_online_agent(
    subjects: &[SubjectData],
    config: &ExperimentConfig,
    phase1: &[DecisionRecord],
    population: &[TrainedClassifier],
) -> Result<Agent> {
    let mut envs = Vec::with_capacity(subjects.len());
    for (s, model) in subjects.iter().zip(population) {
        let obs: Vec<Observation> = s
            .valid()
            .map(|(b, f)| {
                Ok(Observation {
                    time: b.time,
                    p_stress: model.predict_proba_row(&f.values(config.feature_set))?,
                })
            })
            .collect::<Result<_>>()?;
        let rates = rates_from_log(
            phase1.iter().filter(|r| r.subject_id == s.subject_id()),
            config.online.recalibration_interval,
        );
        envs.push(OfflineEnv::new(obs, *rates.rates(), RewardMode::ContextAware)?);
    }
    let mut env = EpisodeCycle::new(envs)?;
    let mut agent_config = config.agent.clone();
    agent_config.seed = rng::derive_seed(config.seed, "online-agent");
    let mut agent = Agent::new(agent_config)?;
    let steps = agent.config().total_steps;
    train_offline(&mut agent, &mut env, steps)?;
    Ok(agent)
}

/// Phase-1 log, per-subject phase-1 labels and leave-one-subject-out
/// population models.
fn online_setup(
    subjects: &[SubjectData],
    config: &ExperimentConfig,
) -> Result<(Vec<DecisionRecord>, Vec<Vec<LabeledSample>>, Vec<TrainedClassifier>)> {
    config.validate()?;
    let phase1 = statistical_collection(subjects, config)?;
    let labels: Vec<Vec<LabeledSample>> =
        subjects.iter().map(|s| labels_from_log(s, &phase1)).collect::<Result<_>>()?;
    let model_seed = rng::derive_seed(config.seed, "online-model");
    let population: Vec<TrainedClassifier> = (0..subjects.len())
        .map(|i| {
            let data = Dataset::from_samples(&population_labels(&labels, i), config.feature_set)?;
            models::train_matrix(&data, &config.classifier, model_seed)
        })
        .collect::<Result<_>>()?;
    Ok((phase1, labels, population))
}

/// The agent the online study deploys.
pub fn train_online_agent(subjects: &[SubjectData], config: &ExperimentConfig) -> Result<Agent> {
    let (phase1, _, population) = online_setup(subjects, config)?;
    pretrain_online_agent(subjects, config, &phase1, &population)
}

pub fn run_online_study(subjects: &[SubjectData], config: &ExperimentConfig) -> Result<OnlineRun> {
    let (phase1, labels, population) = online_setup(subjects, config)?;
    let model_seed = rng::derive_seed(config.seed, "online-model");
    let agent = pretrain_online_agent(subjects, config, &phase1, &population)?;

    let spec = CollectionSpec {
        study: ONLINE_STUDY,
        replication: 0,
        seed: config.seed,
        kind: PolicyKind::ContextAwareAl,
        feature_set: config.feature_set,
        density: config.density,
        daily_cap: config.daily_cap,
        random_rate: 0.0,
        epsilon: config.online.epsilon,
        forced_exploration: config.online.forced_exploration,
        recalibration_interval: config.online.recalibration_interval,
    };
    let mut log = phase1;
    let mut models_out = Vec::with_capacity(subjects.len());
    let mut retrains = Vec::with_capacity(subjects.len());
    for (i, s) in subjects.iter().enumerate() {
        let slot = ModelSlot::new(population[i].clone());
        let mut retrainer = Retrainer::new(
            config.online.retrain_cadence,
            population_labels(&labels, i),
            config.feature_set,
            config.classifier.clone(),
            model_seed,
        )
        .with_personal_weight(config.online.personal_weight);
        let outcome = run_collection(s, &spec, Some(&agent), Some(&slot), Some(&mut retrainer))?;
        log::info!(
            "{}: {} prompts, {} answers, {} retrains",
            s.subject_id(),
            outcome.log.iter().filter(|r| r.answered.is_some()).count(),
            outcome.answers.len(),
            outcome.retrains
        );
        retrains.push(outcome.retrains);
        models_out.push((*slot.current()).clone());
        log.extend(outcome.log);
    }
    let report = online_report(subjects, config, &log)?;
    Ok(OnlineRun {
        log,
        agent,
        models: models_out,
        retrains,
        report,
    })
}

/// Every reported online metric, computed from the decision log alone.
pub fn online_report(subjects: &[SubjectData], config: &ExperimentConfig, log: &[DecisionRecord]) -> Result<OnlineReport> {
    let mut summaries = Vec::with_capacity(subjects.len());
    let mut pools: BTreeMap<&str, Vec<LabeledSample>> = BTreeMap::new();
    for study in [PHASE1_STUDY, ONLINE_STUDY] {
        let mut pool = Vec::new();
        for s in subjects {
            let records: Vec<&DecisionRecord> =
                log.iter().filter(|r| r.study == study && r.subject_id == s.subject_id()).collect();
            let samples = attach_labels(s, &answers_from_log(records.iter().copied()), None)?;
            if study == ONLINE_STUDY {
                let mut per_day: BTreeMap<i64, u32> = BTreeMap::new();
                for r in records.iter().filter(|r| r.answered.is_some()) {
                    *per_day.entry(r.timestamp.day()).or_default() += 1;
                }
                summaries.push(SubjectSummary {
                    subject_id: s.subject_id().to_string(),
                    decisions: records.len(),
                    prompts: records.iter().filter(|r| r.answered.is_some()).count(),
                    answered: records.iter().filter(|r| r.answered == Some(true)).count(),
                    labels: samples.len(),
                    max_daily_prompts: per_day.values().copied().max().unwrap_or(0),
                });
            }
            pool.extend(samples);
        }
        pools.insert(study, pool);
    }
    let cv_seed = rng::derive_seed(config.seed, "online-cv");
    let mut metrics = Vec::new();
    for (study, pool) in &pools {
        for set in [FeatureSet::PpgOnly, FeatureSet::PpgContext] {
            let data = Dataset::from_samples(pool, set)?;
            let (neg, pos) = data.class_counts();
            let cv = kfold_evaluate(&data, &config.classifier, config.online.folds, cv_seed).map_err(|e| {
                Error::Experiment(format!("{study} labels ({neg} negative, {pos} positive) cannot be cross-validated: {e}"))
            })?;
            metrics.push(CollectionMetrics {
                collection: study.to_string(),
                feature_set: set,
                samples: data.len(),
                positives: pos,
                cv,
            });
        }
    }
    Ok(OnlineReport {
        subjects: summaries,
        metrics,
    })
}
