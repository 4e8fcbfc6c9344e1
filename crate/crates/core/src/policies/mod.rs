//! Prompt-triggering policies behind one decision type, plus the
//! bookkeeping they share: per-hour response rates, a daily prompt cap and
//! an atomically swappable classifier.

mod density;

pub use density::{DensityConfig, DensityTracker, Projection, DEFAULT_QUOTA, DEFAULT_WARMUP, PROBABILITY_FLOOR};

use std::sync::{Arc, RwLock};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agent::{Action, Agent, AgentState};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::models::{self, ClassifierConfig, Dataset, LabeledSample, TrainedClassifier};
use crate::rng::Rng;
use crate::time::Timestamp;

pub const DAILY_CAP: u32 = 7;
pub const RECALIBRATION_INTERVAL: u32 = 100;
pub const FORCED_EXPLORATION: f64 = 0.05;
pub const PRIOR_RESPONSE_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    Random,
    /// Statistical policy still in its observation stage.
    Observation,
    Density,
    QuotaReached,
    Greedy,
    /// ε-branch of the agent's own exploration.
    Epsilon,
    /// Forced random prompt of the context-aware policy.
    Exploration,
    DailyCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub trigger: Action,
    /// Probability with which this policy would prompt in this situation.
    pub probability_used: f64,
    pub rationale: Rationale,
}

impl PolicyDecision {
    pub fn new(trigger: Action, probability_used: f64, rationale: Rationale) -> Self {
        Self {
            trigger,
            probability_used: probability_used.clamp(0.0, 1.0),
            rationale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    Statistical,
    TraditionalAl,
    ContextAwareAl,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Random,
        PolicyKind::Statistical,
        PolicyKind::TraditionalAl,
        PolicyKind::ContextAwareAl,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Statistical => "statistical",
            PolicyKind::TraditionalAl => "traditional_al",
            PolicyKind::ContextAwareAl => "context_aware_al",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s || k.tag().replace('_', "-") == s)
            .ok_or_else(|| Error::Parameter(format!("unknown policy `{s}`")))
    }
}

pub fn random_policy(rate: f64, rng: &mut Rng) -> Result<PolicyDecision> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Parameter(format!("query rate {rate} outside [0, 1]")));
    }
    let trigger = if rng.random::<f64>() < rate {
        Action::Query
    } else {
        Action::NoQuery
    };
    Ok(PolicyDecision::new(trigger, rate, Rationale::Random))
}

pub fn statistical_policy(features: &[f64], tracker: &mut DensityTracker, rng: &mut Rng) -> Result<PolicyDecision> {
    tracker.decide(features, rng)
}

fn agent_decision(agent: &Agent, state: &AgentState, epsilon: f64, rng: &mut Rng) -> Result<PolicyDecision> {
    let greedy = agent.greedy(state)?;
    let action = agent.act(state, epsilon, rng)?;
    let p_query = if greedy.is_query() {
        1.0 - epsilon / 2.0
    } else {
        epsilon / 2.0
    };
    let rationale = if action == greedy { Rationale::Greedy } else { Rationale::Epsilon };
    Ok(PolicyDecision::new(action, p_query, rationale))
}

/// Uncertainty-only agent: context components of the state are held at 0.5.
pub fn traditional_al_policy(agent: &Agent, p_stress: f64, epsilon: f64, rng: &mut Rng) -> Result<PolicyDecision> {
    if !(0.0..=1.0).contains(&p_stress) {
        return Err(Error::Parameter(format!("stress probability {p_stress} outside [0, 1]")));
    }
    let state = AgentState {
        uncertainty: crate::agent::uncertainty(p_stress),
        ..AgentState::neutral()
    };
    agent_decision(agent, &state, epsilon, rng)
}

/// Context-aware agent with a forced random prompt on a fraction of occasions.
///
/// The forced draw comes from `exploration_rng` so that changing
/// `forced_exploration` leaves the agent's own draws untouched.
pub fn context_aware_policy(
    agent: &Agent,
    state: &AgentState,
    epsilon: f64,
    forced_exploration: f64,
    exploration_rng: &mut Rng,
    rng: &mut Rng,
) -> Result<PolicyDecision> {
    if !(0.0..=1.0).contains(&forced_exploration) {
        return Err(Error::Parameter(format!("forced exploration {forced_exploration} outside [0, 1]")));
    }
    let forced = exploration_rng.random::<f64>() < forced_exploration;
    let d = agent_decision(agent, state, epsilon, rng)?;
    let p = forced_exploration + (1.0 - forced_exploration) * d.probability_used;
    if forced {
        Ok(PolicyDecision::new(Action::Query, p, Rationale::Exploration))
    } else {
        Ok(PolicyDecision::new(d.trigger, p, d.rationale))
    }
}

/// Per-hour answer rates, recomputed from cumulative counts every
/// `interval` decision events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRateTable {
    rates: [f64; 24],
    delivered: [u32; 24],
    answered: [u32; 24],
    interval: u32,
    events: u32,
}

impl Default for ResponseRateTable {
    fn default() -> Self {
        Self::new(RECALIBRATION_INTERVAL)
    }
}

impl ResponseRateTable {
    pub fn new(interval: u32) -> Self {
        Self {
            rates: [PRIOR_RESPONSE_RATE; 24],
            delivered: [0; 24],
            answered: [0; 24],
            interval: interval.max(1),
            events: 0,
        }
    }

    pub fn rates(&self) -> &[f64; 24] {
        &self.rates
    }

    pub fn rate(&self, hour: usize) -> f64 {
        self.rates[hour % 24]
    }

    pub fn delivered(&self) -> &[u32; 24] {
        &self.delivered
    }

    pub fn answered(&self) -> &[u32; 24] {
        &self.answered
    }

    /// Count a delivered prompt. Rates change only at recalibration.
    pub fn record(&mut self, hour: usize, answered: bool) {
        self.delivered[hour % 24] += 1;
        if answered {
            self.answered[hour % 24] += 1;
        }
    }

    /// Count one decision event; returns true when this event triggered a recalibration.
    pub fn tick(&mut self) -> bool {
        self.events += 1;
        if self.events.is_multiple_of(self.interval) {
            self.recalibrate();
            true
        } else {
            false
        }
    }

    pub fn recalibrate(&mut self) {
        for h in 0..24 {
            self.rates[h] = if self.delivered[h] > 0 {
                f64::from(self.answered[h]) / f64::from(self.delivered[h])
            } else {
                PRIOR_RESPONSE_RATE
            };
        }
    }
}

/// Turns prompts beyond the daily cap into `NoQuery`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyCap {
    cap: u32,
    day: Option<i64>,
    used: u32,
}

impl Default for DailyCap {
    fn default() -> Self {
        Self::new(DAILY_CAP)
    }
}

impl DailyCap {
    pub fn new(cap: u32) -> Self {
        Self { cap, day: None, used: 0 }
    }

    pub fn used_today(&self, now: Timestamp) -> u32 {
        if self.day == Some(now.day()) {
            self.used
        } else {
            0
        }
    }

    pub fn apply(&mut self, now: Timestamp, decision: PolicyDecision) -> PolicyDecision {
        if self.day != Some(now.day()) {
            self.day = Some(now.day());
            self.used = 0;
        }
        if !decision.trigger.is_query() {
            return decision;
        }
        if self.used >= self.cap {
            return PolicyDecision::new(Action::NoQuery, 0.0, Rationale::DailyCap);
        }
        self.used += 1;
        decision
    }
}

/// Shared handle to the classifier currently used for decisions.
///
/// Readers clone the inner `Arc`; a retrain replaces it in one step, so a
/// decision never sees a half-updated model.
#[derive(Debug, Clone)]
pub struct ModelSlot(Arc<RwLock<Arc<TrainedClassifier>>>);

impl ModelSlot {
    pub fn new(model: TrainedClassifier) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(model))))
    }

    pub fn current(&self) -> Arc<TrainedClassifier> {
        Arc::clone(&self.0.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn swap(&self, model: TrainedClassifier) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(model);
    }
}

/// Retrains the classifier on prior data plus newly labeled samples every
/// `cadence` events.
#[derive(Debug, Clone)]
pub struct Retrainer {
    pub cadence: u32,
    pub prior: Vec<LabeledSample>,
    pub feature_set: FeatureSet,
    pub config: ClassifierConfig,
    pub seed: u64,
    /// Weight of pool samples relative to prior samples.
    pub personal_weight: f64,
    events: u32,
    retrains: u32,
}

impl Retrainer {
    pub fn new(
        cadence: u32,
        prior: Vec<LabeledSample>,
        feature_set: FeatureSet,
        config: ClassifierConfig,
        seed: u64,
    ) -> Self {
        Self {
            cadence: cadence.max(1),
            prior,
            feature_set,
            config,
            seed,
            personal_weight: 1.0,
            events: 0,
            retrains: 0,
        }
    }

    pub fn with_personal_weight(mut self, weight: f64) -> Self {
        self.personal_weight = weight;
        self
    }

    /// Successful retrains so far.
    pub fn retrains(&self) -> u32 {
        self.retrains
    }

    /// Count one event; on cadence, retrain and swap the model in `slot`.
    /// Returns whether a new model was installed.
    pub fn tick(&mut self, slot: &ModelSlot, pool: &[LabeledSample]) -> Result<bool> {
        if !self.advance() {
            return Ok(false);
        }
        self.retrain(slot, pool)
    }

    /// Count one event; returns whether a retrain is due.
    pub fn advance(&mut self) -> bool {
        self.events += 1;
        self.events.is_multiple_of(self.cadence)
    }

    pub fn retrain(&mut self, slot: &ModelSlot, pool: &[LabeledSample]) -> Result<bool> {
        let mut data = Dataset::from_samples(&self.prior, self.feature_set)?;
        data.extend_weighted(&Dataset::from_samples(pool, self.feature_set)?, self.personal_weight)?;
        let (neg, pos) = data.class_counts();
        if neg < 2 || pos < 2 {
            log::warn!("retraining skipped: pool has {neg} negative and {pos} positive samples");
            return Ok(false);
        }
        let model = models::train_matrix(&data, &self.config, self.seed)?;
        slot.swap(model);
        self.retrains += 1;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn random_policy_extremes() {
        let mut r = rng::stream(0, "t");
        for _ in 0..100 {
            assert_eq!(random_policy(0.0, &mut r).unwrap().trigger, Action::NoQuery);
            assert_eq!(random_policy(1.0, &mut r).unwrap().trigger, Action::Query);
        }
        assert!(random_policy(1.5, &mut r).is_err());
    }

    #[test]
    fn random_policy_rate() {
        let mut r = rng::stream(1, "t");
        let n = (0..10_000)
            .filter(|_| random_policy(0.3, &mut r).unwrap().trigger.is_query())
            .count();
        assert!((n as f64 / 10_000.0 - 0.3).abs() < 0.02);
    }

    #[test]
    fn response_rates() {
        let mut t = ResponseRateTable::new(100);
        for i in 0..4 {
            t.record(14, i < 3);
        }
        assert_eq!(t.rate(14), 0.5);
        for _ in 0..99 {
            assert!(!t.tick());
        }
        assert!(t.tick());
        assert_eq!(t.rate(14), 0.75);
        assert_eq!(t.rate(3), 0.5);
    }

    #[test]
    fn cap_blocks_eighth_prompt_and_resets_next_day() {
        let mut cap = DailyCap::default();
        let q = PolicyDecision::new(Action::Query, 1.0, Rationale::Random);
        let day0 = Timestamp::from_day_hms(0, 9, 0, 0);
        let out: Vec<Action> = (0..10).map(|i| cap.apply(day0.plus_seconds(i * 60), q).trigger).collect();
        assert_eq!(out.iter().filter(|a| a.is_query()).count(), 7);
        assert_eq!(cap.apply(Timestamp::from_day_hms(1, 0, 0, 0), q).trigger, Action::Query);
    }

    #[test]
    fn policy_tags_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.tag().parse::<PolicyKind>().unwrap(), k);
        }
    }
}
