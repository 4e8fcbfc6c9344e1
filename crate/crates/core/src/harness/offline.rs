//! Offline study: statistical collection on every subject, then day-by-day
//! personalization of the subject with the most labels, with policies
//! choosing which of that subject's historical samples to query. A query
//! yields a label only where the collection phase obtained one.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::collect::{answers_from_log, attach_labels, run_collection, CollectionSpec, DecisionRecord, LOG_SCHEMA_VERSION};
use super::curves::{queries_to_performance_curve, recall_curve, PolicyCurve, QueriesNeeded, Trajectory, TrajectoryPoint};
use super::{ExperimentConfig, SubjectData};
use crate::agent::{state_from_observation, train_offline, Action, Agent, AgentState, Observation, OfflineEnv, RewardMode};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::models::{self, Dataset, EvalMetrics, LabeledSample, TrainedClassifier};
use crate::policies::{
    context_aware_policy, traditional_al_policy, DailyCap, PolicyDecision, PolicyKind, Rationale, ResponseRateTable,
};
use crate::rng;
use crate::sim::{answer_attach, Burst, EmaAnswer};
use crate::time::Timestamp;

pub const PHASE1_STUDY: &str = "offline-collection";
pub const PHASE2_STUDY: &str = "offline-personalization";

/// Phase 1: the statistical policy prompts every subject.
pub fn statistical_collection(subjects: &[SubjectData], config: &ExperimentConfig) -> Result<Vec<DecisionRecord>> {
    let spec = CollectionSpec {
        study: PHASE1_STUDY,
        replication: 0,
        seed: config.seed,
        kind: PolicyKind::Statistical,
        feature_set: config.feature_set,
        density: config.density,
        daily_cap: config.daily_cap,
        random_rate: 0.0,
        epsilon: 0.0,
        forced_exploration: 0.0,
        recalibration_interval: config.online.recalibration_interval,
    };
    let mut log = Vec::new();
    for s in subjects {
        log.extend(run_collection(s, &spec, None, None, None)?.log);
    }
    Ok(log)
}

/// Labeled samples for one subject from the answers in `log`.
pub fn labels_from_log(subject: &SubjectData, log: &[DecisionRecord]) -> Result<Vec<LabeledSample>> {
    let answers = answers_from_log(log.iter().filter(|r| r.subject_id == subject.subject_id()));
    attach_labels(subject, &answers, None)
}

/// Response-rate table rebuilt from one subject's logged decisions.
pub fn rates_from_log<'a>(records: impl IntoIterator<Item = &'a DecisionRecord>, interval: u32) -> ResponseRateTable {
    let mut t = ResponseRateTable::new(interval);
    for r in records {
        if let Some(a) = r.answered {
            t.record(r.timestamp.hour(), a);
        }
        t.tick();
    }
    t
}

/// Everything phase 2 needs that is fixed before any policy acts.
#[derive(Debug, Clone)]
pub struct OfflineSetup {
    pub target: String,
    target_index: usize,
    n_train: usize,
    /// Collected answer attached to each training sample, if any.
    historical: Vec<Option<EmaAnswer>>,
    test_rows: Vec<Vec<f64>>,
    test_labels: Vec<u8>,
    population: Dataset,
    pub baseline: TrainedClassifier,
    pub baseline_recall: f64,
    /// Recall with every collected training label.
    pub full_recall: f64,
    pub response_rates: ResponseRateTable,
    model_seed: u64,
}

impl OfflineSetup {
    pub fn build(subjects: &[SubjectData], config: &ExperimentConfig, phase1: &[DecisionRecord]) -> Result<Self> {
        let set = config.feature_set;
        let labels: Vec<Vec<LabeledSample>> =
            subjects.iter().map(|s| labels_from_log(s, phase1)).collect::<Result<_>>()?;
        let target_index = match &config.offline.target {
            Some(id) => subjects
                .iter()
                .position(|s| s.subject_id() == id)
                .ok_or_else(|| Error::Experiment(format!("offline target {id} is not in the cohort")))?,
            None => (0..subjects.len())
                .max_by_key(|&i| (labels[i].len(), std::cmp::Reverse(i)))
                .ok_or_else(|| Error::Experiment("cohort is empty".into()))?,
        };
        let pop_samples: Vec<LabeledSample> = labels
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_index)
            .flat_map(|(_, l)| l.iter().cloned())
            .collect();
        let population = Dataset::from_samples(&pop_samples, set)?;
        let (neg, pos) = population.class_counts();
        if neg < 2 || pos < 2 {
            return Err(Error::Experiment(format!(
                "population pool has {neg} negative and {pos} positive labels; collect more before personalizing"
            )));
        }

        let target = &subjects[target_index];
        let valid: Vec<(&Burst, &FeatureVector)> = target.valid().collect();
        let n_test = ((valid.len() as f64) * config.offline.test_fraction).ceil() as usize;
        if n_test == 0 || n_test >= valid.len() {
            return Err(Error::Experiment(format!(
                "target {} has {} usable samples, too few for a {} test split",
                target.subject_id(),
                valid.len(),
                config.offline.test_fraction
            )));
        }
        let n_train = valid.len() - n_test;
        let test_rows: Vec<Vec<f64>> = valid[n_train..].iter().map(|(_, f)| f.values(set)).collect();
        let test_labels: Vec<u8> = valid[n_train..].iter().map(|(b, _)| u8::from(b.stress)).collect();
        let test_pos = test_labels.iter().filter(|&&l| l == 1).count();
        if test_pos == 0 || test_pos == test_labels.len() {
            return Err(Error::Experiment(format!(
                "held-out split of {} holds a single class",
                target.subject_id()
            )));
        }
        let answers = answers_from_log(phase1.iter().filter(|r| r.subject_id == target.subject_id()));
        let historical: Vec<Option<EmaAnswer>> =
            valid[..n_train].iter().map(|(b, _)| answer_attach(b.time, &answers).copied()).collect();
        if historical.iter().all(Option::is_none) {
            return Err(Error::Experiment(format!(
                "target {} has no collected labels before the held-out split",
                target.subject_id()
            )));
        }

        let model_seed = rng::derive_seed(config.seed, "offline-model");
        let baseline = models::train_matrix(&population, &config.classifier, model_seed)?;
        let mut setup = Self {
            target: target.subject_id().to_string(),
            target_index,
            n_train,
            historical,
            test_rows,
            test_labels,
            population,
            baseline_recall: 0.0,
            full_recall: 0.0,
            baseline,
            response_rates: rates_from_log(
                phase1.iter().filter(|r| r.subject_id == target.subject_id()),
                config.online.recalibration_interval,
            ),
            model_seed,
        };
        setup.baseline_recall = setup.recall(&setup.baseline)?;
        let all: Vec<(usize, u8)> = setup
            .historical
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|a| (i, a.label5)))
            .collect();
        let full = setup.personalized(&setup.pool(subjects, &all)?, config)?;
        setup.full_recall = setup.recall(&full)?;
        Ok(setup)
    }

    pub fn target_subject<'a>(&self, subjects: &'a [SubjectData]) -> &'a SubjectData {
        &subjects[self.target_index]
    }

    pub fn train_len(&self) -> usize {
        self.n_train
    }

    pub fn test_len(&self) -> usize {
        self.test_labels.len()
    }

    /// Training samples that carry a collected label.
    pub fn labeled_train_len(&self) -> usize {
        self.historical.iter().filter(|a| a.is_some()).count()
    }

    /// Population model retrained with the target's own labels.
    pub fn personalized(&self, pool: &[LabeledSample], config: &ExperimentConfig) -> Result<TrainedClassifier> {
        if pool.is_empty() {
            return Ok(self.baseline.clone());
        }
        let mut data = self.population.clone();
        data.extend_weighted(&Dataset::from_samples(pool, config.feature_set)?, config.offline.personal_weight)?;
        models::train_matrix(&data, &config.classifier, self.model_seed)
    }

    /// Minority-class recall on the held-out tail.
    pub fn recall(&self, model: &TrainedClassifier) -> Result<f64> {
        let scores: Vec<f64> = self.test_rows.iter().map(|r| model.predict_proba_row(r)).collect::<Result<_>>()?;
        Ok(EvalMetrics::from_scores(&scores, &self.test_labels).recall)
    }

    /// Labeled samples for (training position, label) pairs.
    fn pool(&self, subjects: &[SubjectData], labeled: &[(usize, u8)]) -> Result<Vec<LabeledSample>> {
        let train: Vec<&FeatureVector> = self.target_subject(subjects).valid().take(self.n_train).map(|(_, f)| f).collect();
        labeled
            .iter()
            .map(|&(pos, l)| {
                let mut f = train[pos].clone();
                f.label = Some(l);
                LabeledSample::new(f, l)
            })
            .collect()
    }

    /// Training positions grouped by calendar day.
    fn days(&self, subjects: &[SubjectData]) -> Vec<std::ops::Range<usize>> {
        let days: Vec<i64> = self
            .target_subject(subjects)
            .valid()
            .take(self.n_train)
            .map(|(b, _)| b.time.day())
            .collect();
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=days.len() {
            if i == days.len() || days[i] != days[start] {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    fn evaluate(&self, subjects: &[SubjectData], config: &ExperimentConfig, labeled: &[(usize, u8)]) -> Result<f64> {
        self.recall(&self.personalized(&self.pool(subjects, labeled)?, config)?)
    }
}

/// Result of the offline study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub target: String,
    pub baseline_recall: f64,
    /// Recall with every collected training label.
    pub full_recall: f64,
    /// Baseline plus `target_fraction` of the way to `full_recall`.
    pub target_recall: f64,
    pub levels: Vec<f64>,
    /// Per policy, one trajectory per replication.
    pub trajectories: BTreeMap<PolicyKind, Vec<Trajectory>>,
    pub curves: Vec<PolicyCurve>,
    pub queries_needed: Vec<QueriesNeeded>,
}

impl OfflineReport {
    pub fn needed(&self, policy: PolicyKind, level: f64) -> Option<&QueriesNeeded> {
        self.queries_needed.iter().find(|q| q.policy == policy && q.level == level)
    }
}

/// Output of a full offline run: the decision log and what it implies.
#[derive(Debug, Clone)]
pub struct OfflineRun {
    pub log: Vec<DecisionRecord>,
    pub report: OfflineReport,
}

/// Deep Q agent pretrained on the target's training stream with baseline
/// stress probabilities.
pub fn pretrain_agent(
    subjects: &[SubjectData],
    setup: &OfflineSetup,
    config: &ExperimentConfig,
    mode: RewardMode,
    replication: u32,
) -> Result<Agent> {
    let obs: Vec<Observation> = setup
        .target_subject(subjects)
        .valid()
        .take(setup.n_train)
        .map(|(b, f)| {
            Ok(Observation {
                time: b.time,
                p_stress: setup.baseline.predict_proba_row(&f.values(config.feature_set))?,
            })
        })
        .collect::<Result<_>>()?;
    let mut env = OfflineEnv::new(obs, *setup.response_rates.rates(), mode)?;
    let label = match mode {
        RewardMode::ContextAware => "offline-agent-context",
        RewardMode::UncertaintyOnly => "offline-agent-uncertainty",
    };
    let mut agent_config = config.agent.clone();
    agent_config.seed = rng::derive_indexed(config.seed, label, u64::from(replication));
    let mut agent = Agent::new(agent_config)?;
    let steps = agent.config().total_steps;
    train_offline(&mut agent, &mut env, steps)?;
    Ok(agent)
}

struct PolicyState {
    kind: PolicyKind,
    agent: Option<Agent>,
    model: TrainedClassifier,
    labeled: Vec<(usize, u8)>,
    cap: DailyCap,
    rates: ResponseRateTable,
    last_query: Option<Timestamp>,
    trajectory: Trajectory,
}

struct Proposal {
    position: usize,
    p_stress: f64,
    state: AgentState,
    decision: PolicyDecision,
}

/// Run every replication of phase 2 on top of a fresh phase-1 log.
pub fn run_offline_study(subjects: &[SubjectData], config: &ExperimentConfig) -> Result<OfflineRun> {
    config.validate()?;
    let phase1 = statistical_collection(subjects, config)?;
    let setup = OfflineSetup::build(subjects, config, &phase1)?;
    log::info!(
        "offline target {}: {} training samples ({} labeled), {} test samples, recall baseline {:.3}, full {:.3}",
        setup.target,
        setup.train_len(),
        setup.labeled_train_len(),
        setup.test_len(),
        setup.baseline_recall,
        setup.full_recall,
    );
    let mut log = phase1;
    let mut trajectories: BTreeMap<PolicyKind, Vec<Trajectory>> = BTreeMap::new();
    for rep in 0..config.replications {
        let (records, trajs) = run_replication(subjects, &setup, config, rep)?;
        log.extend(records);
        for (k, t) in trajs {
            trajectories.entry(k).or_default().push(t);
        }
    }
    let report = summarize(&setup, config, trajectories);
    Ok(OfflineRun { log, report })
}

fn run_replication(
    subjects: &[SubjectData],
    setup: &OfflineSetup,
    config: &ExperimentConfig,
    rep: u32,
) -> Result<(Vec<DecisionRecord>, BTreeMap<PolicyKind, Trajectory>)> {
    let target = setup.target_subject(subjects);
    let sid = target.subject_id().to_string();
    let train: Vec<(&Burst, &FeatureVector)> = target.valid().take(setup.n_train).collect();
    let set = config.feature_set;
    let mut states: Vec<PolicyState> = Vec::new();
    for &kind in &config.policies {
        let agent = match kind {
            PolicyKind::TraditionalAl => Some(pretrain_agent(subjects, setup, config, RewardMode::UncertaintyOnly, rep)?),
            PolicyKind::ContextAwareAl => Some(pretrain_agent(subjects, setup, config, RewardMode::ContextAware, rep)?),
            _ => None,
        };
        states.push(PolicyState {
            kind,
            agent,
            model: setup.baseline.clone(),
            labeled: Vec::new(),
            cap: DailyCap::new(config.daily_cap),
            rates: setup.response_rates.clone(),
            last_query: None,
            trajectory: vec![TrajectoryPoint {
                step: 0,
                queries_used: 0,
                recall: setup.baseline_recall,
            }],
        });
    }
    let mut log = Vec::new();
    let mut used = 0u32;
    let mut unused = rng::stream(0, "greedy");
    let mut unused_forced = rng::stream(0, "greedy-forced");
    for (step, day) in setup.days(subjects).into_iter().enumerate() {
        let step = step as u32 + 1;
        let mut proposals: Vec<Vec<Proposal>> = Vec::with_capacity(states.len());
        for st in &states {
            let mut last = st.last_query;
            let mut props = Vec::new();
            for pos in day.clone() {
                let (b, f) = train[pos];
                let p = st.model.predict_proba_row(&f.values(set))?;
                let state = state_from_observation(p, st.rates.rates(), last, b.time)?;
                let decision = match (st.kind, &st.agent) {
                    (PolicyKind::TraditionalAl, Some(a)) => traditional_al_policy(a, p, 0.0, &mut unused)?,
                    (PolicyKind::ContextAwareAl, Some(a)) => {
                        context_aware_policy(a, &state, 0.0, 0.0, &mut unused_forced, &mut unused)?
                    }
                    _ => PolicyDecision::new(Action::Query, 1.0, Rationale::Random),
                };
                if decision.trigger.is_query() {
                    last = Some(b.time);
                    props.push(Proposal {
                        position: pos,
                        p_stress: p,
                        state,
                        decision,
                    });
                }
            }
            proposals.push(props);
        }
        let budget = states
            .iter()
            .zip(&proposals)
            .filter(|(st, _)| st.agent.is_some())
            .map(|(_, p)| p.len())
            .min()
            .unwrap_or(day.len())
            .min(config.daily_cap as usize);
        used += budget as u32;
        for (st, props) in states.iter_mut().zip(proposals) {
            let n_before = st.labeled.len();
            let mut r = rng::indexed_stream(
                rng::derive_indexed(config.seed, &format!("offline-select-{}", st.kind.tag()), u64::from(rep)),
                "step",
                u64::from(step),
            );
            let mut keep: Vec<usize> = index::sample(&mut r, props.len(), budget).into_vec();
            keep.sort_unstable();
            for k in keep {
                let prop = &props[k];
                let (b, _) = train[prop.position];
                let admitted = st.cap.apply(b.time, PolicyDecision::new(Action::Query, 1.0, prop.decision.rationale));
                if !admitted.trigger.is_query() {
                    return Err(Error::Experiment(format!("selection exceeded the daily cap on day {}", b.time.day())));
                }
                let answer = setup.historical[prop.position];
                st.rates.record(b.time.hour(), answer.is_some());
                st.last_query = Some(b.time);
                if let Some(a) = answer {
                    st.labeled.push((prop.position, a.label5));
                }
                let probability_used = match st.agent {
                    Some(_) => prop.decision.probability_used,
                    None => budget as f64 / day.len() as f64,
                };
                log.push(DecisionRecord {
                    schema_version: LOG_SCHEMA_VERSION,
                    study: PHASE2_STUDY.to_string(),
                    replication: rep,
                    step: Some(step),
                    subject_id: sid.clone(),
                    policy: st.kind,
                    burst: b.index,
                    timestamp: b.time,
                    p_stress: prop.p_stress,
                    state: prop.state,
                    probability_used,
                    decision: Action::Query,
                    rationale: prop.decision.rationale,
                    answered: Some(answer.is_some()),
                    label5: answer.map(|a| a.label5),
                    answer_time: answer.map(|a| a.time),
                });
            }
            st.rates.recalibrate();
            let recall = if st.labeled.len() > n_before {
                st.model = setup.personalized(&setup.pool(subjects, &st.labeled)?, config)?;
                setup.recall(&st.model)?
            } else {
                st.trajectory.last().expect("starts with baseline").recall
            };
            st.trajectory.push(TrajectoryPoint {
                step,
                queries_used: used,
                recall,
            });
        }
    }
    Ok((log, states.into_iter().map(|s| (s.kind, s.trajectory)).collect()))
}

/// Recompute every trajectory from a decision log alone.
pub fn replay_offline(subjects: &[SubjectData], config: &ExperimentConfig, log: &[DecisionRecord]) -> Result<OfflineReport> {
    config.validate()?;
    let phase1: Vec<DecisionRecord> = log.iter().filter(|r| r.study == PHASE1_STUDY).cloned().collect();
    let setup = OfflineSetup::build(subjects, config, &phase1)?;
    let position: BTreeMap<usize, usize> = setup
        .target_subject(subjects)
        .valid()
        .take(setup.n_train)
        .enumerate()
        .map(|(pos, (b, _))| (b.index, pos))
        .collect();
    let steps = setup.days(subjects).len() as u32;
    let mut trajectories: BTreeMap<PolicyKind, Vec<Trajectory>> = BTreeMap::new();
    for rep in 0..config.replications {
        for &kind in &config.policies {
            let mut traj = vec![TrajectoryPoint {
                step: 0,
                queries_used: 0,
                recall: setup.baseline_recall,
            }];
            let mut labeled: Vec<(usize, u8)> = Vec::new();
            let mut used = 0u32;
            for step in 1..=steps {
                let n_before = labeled.len();
                for r in log.iter().filter(|r| {
                    r.study == PHASE2_STUDY && r.replication == rep && r.policy == kind && r.step == Some(step)
                }) {
                    used += 1;
                    if let Some(l) = r.label5 {
                        let pos = position.get(&r.burst).ok_or_else(|| {
                            Error::Experiment(format!("logged burst {} is not a training sample of {}", r.burst, setup.target))
                        })?;
                        labeled.push((*pos, l));
                    }
                }
                let recall = if labeled.len() > n_before {
                    setup.evaluate(subjects, config, &labeled)?
                } else {
                    traj.last().expect("starts with baseline").recall
                };
                traj.push(TrajectoryPoint {
                    step,
                    queries_used: used,
                    recall,
                });
            }
            trajectories.entry(kind).or_default().push(traj);
        }
    }
    Ok(summarize(&setup, config, trajectories))
}

fn summarize(setup: &OfflineSetup, config: &ExperimentConfig, trajectories: BTreeMap<PolicyKind, Vec<Trajectory>>) -> OfflineReport {
    let target_recall =
        setup.baseline_recall + config.offline.target_fraction * (setup.full_recall - setup.baseline_recall);
    let mut levels = vec![target_recall];
    levels.extend_from_slice(&config.offline.levels);
    let curves = trajectories.iter().map(|(&k, t)| recall_curve(k, t)).collect();
    let queries_needed = queries_to_performance_curve(&trajectories, &levels);
    OfflineReport {
        target: setup.target.clone(),
        baseline_recall: setup.baseline_recall,
        full_recall: setup.full_recall,
        target_recall,
        levels,
        trajectories,
        curves,
        queries_needed,
    }
}
