//! Real-time collection: one pass over a subject's bursts in time order,
//! with a policy deciding at each burst whether to prompt.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SubjectData;
use crate::agent::{state_from_observation, Action, Agent, AgentState};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::models::LabeledSample;
use crate::policies::{
    context_aware_policy, random_policy, traditional_al_policy, DailyCap, DensityConfig, DensityTracker, ModelSlot,
    PolicyDecision, PolicyKind, Rationale, ResponseRateTable, Retrainer,
};
use crate::rng::{self, Rng};
use crate::sim::{deliver_ema, label_attach, EmaAnswer, EmaOutcome, LABEL_HORIZON_S, RECENT_WINDOW_S};
use crate::time::Timestamp;

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub schema_version: u32,
    pub study: String,
    pub replication: u32,
    /// Personalization step, for step-wise studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u32>,
    pub subject_id: String,
    pub policy: PolicyKind,
    pub burst: usize,
    pub timestamp: Timestamp,
    pub p_stress: f64,
    pub state: AgentState,
    pub probability_used: f64,
    pub decision: Action,
    pub rationale: Rationale,
    /// `None` when no prompt was sent.
    pub answered: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label5: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_time: Option<Timestamp>,
}

impl DecisionRecord {
    pub fn answer(&self) -> Option<EmaAnswer> {
        match (self.label5, self.answer_time) {
            (Some(label5), Some(time)) => Some(EmaAnswer { time, label5 }),
            _ => None,
        }
    }
}

/// Per-subject, per-replication stream of prompt outcomes. Two policies
/// prompting at the same burst see the same uniform draws.
pub fn ema_stream(seed: u64, subject_id: &str, replication: u32, burst: usize) -> Rng {
    let base = rng::derive_indexed(rng::derive_seed(seed, subject_id), "ema", u64::from(replication));
    rng::indexed_stream(base, "burst", burst as u64)
}

/// Counts prompts delivered within the recent window.
#[derive(Debug, Clone, Default)]
pub struct RecentPrompts(VecDeque<Timestamp>);

impl RecentPrompts {
    pub fn count(&mut self, now: Timestamp) -> u32 {
        while self.0.front().is_some_and(|t| now.since(*t) >= RECENT_WINDOW_S) {
            self.0.pop_front();
        }
        self.0.len() as u32
    }

    pub fn push(&mut self, t: Timestamp) {
        self.0.push_back(t);
    }
}

/// Settings shared by every collection run.
#[derive(Debug, Clone)]
pub struct CollectionSpec<'a> {
    pub study: &'a str,
    pub replication: u32,
    pub seed: u64,
    pub kind: PolicyKind,
    pub feature_set: FeatureSet,
    pub density: DensityConfig,
    pub daily_cap: u32,
    pub random_rate: f64,
    pub epsilon: f64,
    pub forced_exploration: f64,
    pub recalibration_interval: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionOutcome {
    pub log: Vec<DecisionRecord>,
    /// Sorted by time.
    pub answers: Vec<EmaAnswer>,
    pub response_rates: ResponseRateTable,
    pub retrains: u32,
}

impl CollectionOutcome {
    pub fn labeled_samples(&self, subject: &SubjectData) -> Result<Vec<LabeledSample>> {
        attach_labels(subject, &self.answers, None)
    }
}

/// Labeled samples for every usable burst with an attached answer. With
/// `before`, only bursts whose labeling horizon has closed by then.
pub fn attach_labels(subject: &SubjectData, answers: &[EmaAnswer], before: Option<Timestamp>) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for (b, f) in subject.valid() {
        if before.is_some_and(|t| b.time.plus_seconds(LABEL_HORIZON_S) > t) {
            break;
        }
        if let Some(l) = label_attach(b.time, answers) {
            let mut f = f.clone();
            f.label = Some(l);
            out.push(LabeledSample::new(f, l)?);
        }
    }
    Ok(out)
}

/// Run one policy over one subject. `slot` supplies stress probabilities
/// (0.5 everywhere without one); with a `retrainer`, the model in `slot` is
/// refreshed on cadence from the labels collected so far.
pub fn run_collection(
    subject: &SubjectData,
    spec: &CollectionSpec<'_>,
    agent: Option<&Agent>,
    slot: Option<&ModelSlot>,
    mut retrainer: Option<&mut Retrainer>,
) -> Result<CollectionOutcome> {
    let sid = subject.subject_id().to_string();
    let profile = &subject.stream.profile;
    let needs_agent = matches!(spec.kind, PolicyKind::TraditionalAl | PolicyKind::ContextAwareAl);
    if needs_agent && agent.is_none() {
        return Err(Error::Experiment(format!("policy {} needs an agent", spec.kind.tag())));
    }
    let mut policy_rng = rng::indexed_stream(rng::derive_seed(spec.seed, &sid), spec.study, u64::from(spec.replication));
    let mut explore_rng = rng::indexed_stream(
        rng::derive_seed(spec.seed, &sid),
        &format!("{}-exploration", spec.study),
        u64::from(spec.replication),
    );
    let mut tracker = DensityTracker::new(spec.density)?;
    let mut rates = ResponseRateTable::new(spec.recalibration_interval);
    let mut cap = DailyCap::new(spec.daily_cap);
    let mut recent = RecentPrompts::default();
    let mut last_query: Option<Timestamp> = None;
    let mut answers: Vec<EmaAnswer> = Vec::new();
    let mut log = Vec::with_capacity(subject.valid_count());

    for (burst, fv) in subject.valid() {
        let values = fv.values(spec.feature_set);
        let p = match slot {
            Some(s) => s.current().predict_proba_row(&values)?,
            None => 0.5,
        };
        let state = state_from_observation(p, rates.rates(), last_query, burst.time)?;
        let decision: PolicyDecision = match spec.kind {
            PolicyKind::Random => random_policy(spec.random_rate, &mut policy_rng)?,
            PolicyKind::Statistical => tracker.decide(&values, &mut policy_rng)?,
            PolicyKind::TraditionalAl => traditional_al_policy(agent.expect("checked"), p, spec.epsilon, &mut policy_rng)?,
            PolicyKind::ContextAwareAl => context_aware_policy(
                agent.expect("checked"),
                &state,
                spec.epsilon,
                spec.forced_exploration,
                &mut explore_rng,
                &mut policy_rng,
            )?,
        };
        let decision = cap.apply(burst.time, decision);
        let mut record = DecisionRecord {
            schema_version: LOG_SCHEMA_VERSION,
            study: spec.study.to_string(),
            replication: spec.replication,
            step: None,
            subject_id: sid.clone(),
            policy: spec.kind,
            burst: burst.index,
            timestamp: burst.time,
            p_stress: p,
            state,
            probability_used: decision.probability_used,
            decision: decision.trigger,
            rationale: decision.rationale,
            answered: None,
            label5: None,
            answer_time: None,
        };
        if decision.trigger.is_query() {
            let n_recent = recent.count(burst.time);
            let mut ema = ema_stream(spec.seed, &sid, spec.replication, burst.index);
            let outcome = deliver_ema(profile, burst.time, n_recent, burst.stress, &mut ema);
            recent.push(burst.time);
            last_query = Some(burst.time);
            rates.record(burst.time.hour(), outcome.answer().is_some());
            record.answered = Some(outcome.answer().is_some());
            if let EmaOutcome::Answered { answer } = outcome {
                record.label5 = Some(answer.label5);
                record.answer_time = Some(answer.time);
                let at = answers.partition_point(|a| *a <= answer);
                answers.insert(at, answer);
                if label_attach(burst.time, std::slice::from_ref(&answer)).is_some() {
                    tracker.record_label(&values);
                }
            }
        }
        log.push(record);
        rates.tick();
        if let (Some(r), Some(slot)) = (retrainer.as_deref_mut(), slot) {
            if r.advance() {
                let pool = attach_labels(subject, &answers, Some(burst.time))?;
                r.retrain(slot, &pool)?;
            }
        }
    }
    Ok(CollectionOutcome {
        log,
        answers,
        response_rates: rates,
        retrains: retrainer.map(|r| r.retrains()).unwrap_or(0),
    })
}

/// Answers recorded in a log, sorted.
pub fn answers_from_log<'a>(records: impl IntoIterator<Item = &'a DecisionRecord>) -> Vec<EmaAnswer> {
    let mut a: Vec<EmaAnswer> = records.into_iter().filter_map(DecisionRecord::answer).collect();
    a.sort();
    a
}
