//! Deep Q-learning agent that decides, sample by sample, whether to send a
//! self-report prompt.
//!
//! The state has four components in `[0, 1]`: classifier uncertainty, the
//! participant's response rate for the current hour, normalized time since
//! the last prompt, and time of day. Rewards are sigmoids of the first three.

mod memory;
pub mod network;

pub use memory::{ReplayMemory, Transition, DEFAULT_CAPACITY};
pub use network::{Adam, AdamConfig, Example, LossReport, QNetwork, Regularization, DEFAULT_WIDTHS};

use rand::Rng as _;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::sigmoid;
use crate::rng::{self, Rng};
use crate::time::{Timestamp, SECONDS_PER_HOUR};

/// Time since the last prompt saturates at this many seconds.
pub const MAX_QUERY_GAP_S: i64 = 4 * SECONDS_PER_HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    NoQuery,
    Query,
}

impl Action {
    /// Output index in the Q-network.
    pub fn index(self) -> usize {
        match self {
            Action::NoQuery => 0,
            Action::Query => 1,
        }
    }

    pub fn is_query(self) -> bool {
        self == Action::Query
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub uncertainty: f64,
    pub response_rate: f64,
    pub time_since_query: f64,
    pub time_of_day: f64,
}

impl AgentState {
    pub fn new(uncertainty: f64, response_rate: f64, time_since_query: f64, time_of_day: f64) -> Result<Self> {
        let s = Self {
            uncertainty,
            response_rate,
            time_since_query,
            time_of_day,
        };
        if s.to_input().iter().all(|v| (0.0..=1.0).contains(v)) {
            Ok(s)
        } else {
            Err(Error::Parameter(format!("state components must lie in [0, 1]: {s:?}")))
        }
    }

    /// All components at 0.5.
    pub fn neutral() -> Self {
        Self {
            uncertainty: 0.5,
            response_rate: 0.5,
            time_since_query: 0.5,
            time_of_day: 0.5,
        }
    }

    pub fn to_input(&self) -> [f64; 4] {
        [self.uncertainty, self.response_rate, self.time_since_query, self.time_of_day]
    }

    /// Keep only uncertainty; the other components become 0.5.
    pub fn uncertainty_only(&self) -> Self {
        Self {
            uncertainty: self.uncertainty,
            ..Self::neutral()
        }
    }
}

/// Uncertainty of a stress probability: 1 on the decision boundary, 0 at certainty.
pub fn uncertainty(p_stress: f64) -> f64 {
    1.0 - 2.0 * (p_stress - 0.5).abs()
}

pub fn state_from_observation(
    p_stress: f64,
    response_rates: &[f64; 24],
    last_query: Option<Timestamp>,
    now: Timestamp,
) -> Result<AgentState> {
    if !(0.0..=1.0).contains(&p_stress) {
        return Err(Error::Parameter(format!("stress probability {p_stress} outside [0, 1]")));
    }
    let gap = match last_query {
        Some(t) => (now.since(t) as f64 / MAX_QUERY_GAP_S as f64).clamp(0.0, 1.0),
        None => 1.0,
    };
    AgentState::new(uncertainty(p_stress), response_rates[now.hour()], gap, now.hour() as f64 / 24.0)
}

/// Which reward the environment pays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Uncertainty, response rate and spacing.
    #[default]
    ContextAware,
    /// Uncertainty alone; context components of the state are held at 0.5.
    UncertaintyOnly,
}

pub fn uncertainty_reward(u: f64) -> f64 {
    sigmoid(20.0 * (u - 0.5))
}

pub fn response_reward(rate: f64) -> f64 {
    sigmoid(10.0 * (rate - 0.5))
}

pub fn spacing_reward(t: f64) -> f64 {
    sigmoid(10.0 * (t - 0.5))
}

/// Context-aware reward: the sum of three sigmoids for a prompt, its
/// complement to 3 otherwise.
pub fn compute_reward(state: &AgentState, action: Action) -> f64 {
    reward(state, action, RewardMode::ContextAware)
}

pub fn reward(state: &AgentState, action: Action, mode: RewardMode) -> f64 {
    let (query, total) = match mode {
        RewardMode::ContextAware => (
            uncertainty_reward(state.uncertainty)
                + response_reward(state.response_rate)
                + spacing_reward(state.time_since_query),
            3.0,
        ),
        RewardMode::UncertaintyOnly => (uncertainty_reward(state.uncertainty), 1.0),
    };
    match action {
        Action::Query => query,
        Action::NoQuery => total - query,
    }
}

/// Greedy action over a pair of Q-values; ties go to `NoQuery`.
pub fn greedy_action(q: &[f64]) -> Action {
    if q[1] > q[0] {
        Action::Query
    } else {
        Action::NoQuery
    }
}

/// With probability `epsilon` a uniformly random action, otherwise greedy.
pub fn epsilon_greedy_action(net: &QNetwork, state: &AgentState, epsilon: f64, rng: &mut Rng) -> Result<Action> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let q = net.forward(&state.to_input())?;
    if rng.random::<f64>() < epsilon {
        Ok(if rng.random::<bool>() { Action::Query } else { Action::NoQuery })
    } else {
        Ok(greedy_action(&q))
    }
}

/// Linear annealing from `start` to `end` over `anneal_steps`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            anneal_steps: 10_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn constant(epsilon: f64) -> Self {
        Self {
            start: epsilon,
            end: epsilon,
            anneal_steps: 0,
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        if step >= self.anneal_steps {
            return self.end;
        }
        let frac = step as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub warmup_steps: usize,
    pub target_update_rate: f64,
    pub total_steps: u64,
    pub epsilon: EpsilonSchedule,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub memory_capacity: usize,
    pub widths: Vec<usize>,
    pub regularization: Regularization,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            warmup_steps: 100,
            target_update_rate: 1e-2,
            total_steps: 20_000,
            epsilon: EpsilonSchedule::default(),
            optimizer: AdamConfig::default(),
            batch_size: 32,
            memory_capacity: DEFAULT_CAPACITY,
            widths: DEFAULT_WIDTHS.to_vec(),
            regularization: Regularization::default(),
            seed: 0,
        }
    }
}

impl AgentConfig {
    /// Set the step budget and anneal exploration over its first half.
    pub fn with_total_steps(mut self, total_steps: u64) -> Self {
        self.total_steps = total_steps;
        self.epsilon.anneal_steps = total_steps / 2;
        self
    }

    pub fn paper_scale() -> Self {
        Self::default().with_total_steps(200_000)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Parameter(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        let e = &self.epsilon;
        if !(e.start <= 1.0 && e.start >= e.end && e.end >= 0.0) {
            return Err(Error::Parameter(format!("epsilon schedule {e:?} must satisfy 1 >= start >= end >= 0")));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        if self.widths.first() != Some(&4) || self.widths.last() != Some(&2) {
            return Err(Error::Parameter(format!("layer widths {:?} must start at 4 and end at 2", self.widths)));
        }
        Ok(())
    }
}

/// Online and target networks, optimizer, replay memory and exploration stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    config: AgentConfig,
    online: QNetwork,
    target: QNetwork,
    optimizer: Adam,
    memory: ReplayMemory,
    steps: u64,
    rng: Rng,
    #[serde(default)]
    restarts: u32,
}

impl Agent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let mut init = rng::stream(config.seed, "q-network-init");
        let online = QNetwork::random(&config.widths, config.regularization, &mut init)?;
        Ok(Self::from_network(config, online))
    }

    /// Agent whose online and target networks start as `net`.
    pub fn from_network(config: AgentConfig, net: QNetwork) -> Self {
        let optimizer = Adam::new(config.optimizer, net.params().len());
        Self {
            memory: ReplayMemory::new(config.memory_capacity),
            rng: Rng::seed_from_u64(rng::derive_seed(config.seed, "agent")),
            target: net.clone(),
            online: net,
            optimizer,
            steps: 0,
            restarts: 0,
            config,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Transitions observed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.at(self.steps)
    }

    /// Times the networks were re-initialized by [`Agent::revive`].
    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    /// Re-initialize both networks and the optimizer if a hidden layer is
    /// silent on every remembered state. Memory and step count are kept.
    pub fn revive(&mut self) -> Result<bool> {
        let inputs: Vec<[f64; 4]> = self.memory.iter().map(|t| t.state.to_input()).collect();
        let Some(layer) = self.online.dead_layer(inputs.iter().map(|x| x.as_slice())) else {
            return Ok(false);
        };
        self.restarts += 1;
        log::warn!("hidden layer {layer} inactive on all states; re-initializing (restart {})", self.restarts);
        let mut init = rng::indexed_stream(self.config.seed, "q-network-init", u64::from(self.restarts));
        self.online = QNetwork::random(&self.config.widths, self.config.regularization, &mut init)?;
        self.target = self.online.clone();
        self.optimizer = Adam::new(self.config.optimizer, self.online.params().len());
        Ok(true)
    }

    /// `(q_noquery, q_query)`.
    pub fn q_values(&self, state: &AgentState) -> Result<[f64; 2]> {
        let q = self.online.forward(&state.to_input())?;
        Ok([q[0], q[1]])
    }

    pub fn greedy(&self, state: &AgentState) -> Result<Action> {
        Ok(greedy_action(&self.q_values(state)?))
    }

    /// ε-greedy with an external stream, leaving the agent untouched.
    pub fn act(&self, state: &AgentState, epsilon: f64, rng: &mut Rng) -> Result<Action> {
        epsilon_greedy_action(&self.online, state, epsilon, rng)
    }

    /// ε-greedy with the scheduled ε and the agent's own stream.
    pub fn explore(&mut self, state: &AgentState) -> Result<Action> {
        let eps = self.epsilon();
        epsilon_greedy_action(&self.online, state, eps, &mut self.rng)
    }

    /// Store a transition and, once warm, take one gradient step.
    pub fn observe(&mut self, t: Transition) -> Result<Option<LossReport>> {
        self.memory.push(t);
        self.steps += 1;
        if self.memory.len() >= self.config.warmup_steps {
            self.train_step().map(Some)
        } else {
            Ok(None)
        }
    }

    /// One minibatch update of the online network followed by a soft target update.
    pub fn train_step(&mut self) -> Result<LossReport> {
        let need = self.config.warmup_steps.max(1);
        if self.memory.len() < need {
            return Err(Error::NotReady {
                have: self.memory.len(),
                need,
            });
        }
        let batch = self.memory.sample(self.config.batch_size, &mut self.rng);
        let mut examples = Vec::with_capacity(batch.len());
        for t in &batch {
            let target = if t.terminal {
                t.reward
            } else {
                let q = self.target.forward(&t.next_state.to_input())?;
                t.reward + self.config.gamma * q[0].max(q[1])
            };
            examples.push(Example {
                input: t.state.to_input().to_vec(),
                action: t.action.index(),
                target,
            });
        }
        let (report, grad) = self.online.loss_and_gradient(&examples);
        self.optimizer.apply(self.online.params_mut(), &grad);
        self.target.soft_update_from(&self.online, self.config.target_update_rate)?;
        Ok(report)
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: AgentState,
    pub reward: f64,
    pub terminal: bool,
}

pub trait Environment {
    /// Start a new episode and return its first state.
    fn reset(&mut self) -> AgentState;
    fn step(&mut self, action: Action) -> StepOutcome;
}

/// One sample of a recorded stream: when it occurred and the classifier's output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: Timestamp,
    pub p_stress: f64,
}

/// Replays a recorded stream; time since the last prompt follows the agent's own actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineEnv {
    observations: Vec<Observation>,
    response_rates: [f64; 24],
    mode: RewardMode,
    cursor: usize,
    last_query: Option<Timestamp>,
}

impl OfflineEnv {
    pub fn new(observations: Vec<Observation>, response_rates: [f64; 24], mode: RewardMode) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Parameter("offline environment needs at least one observation".into()));
        }
        if let Some(o) = observations.iter().find(|o| !(0.0..=1.0).contains(&o.p_stress)) {
            return Err(Error::Parameter(format!("stress probability {} outside [0, 1]", o.p_stress)));
        }
        if response_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Parameter("response rates must lie in [0, 1]".into()));
        }
        Ok(Self {
            observations,
            response_rates,
            mode,
            cursor: 0,
            last_query: None,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn state(&self) -> AgentState {
        let o = self.observations[self.cursor];
        let s = state_from_observation(o.p_stress, &self.response_rates, self.last_query, o.time)
            .expect("observations validated on construction");
        match self.mode {
            RewardMode::ContextAware => s,
            RewardMode::UncertaintyOnly => s.uncertainty_only(),
        }
    }
}

impl Environment for OfflineEnv {
    fn reset(&mut self) -> AgentState {
        self.cursor = 0;
        self.last_query = None;
        self.state()
    }

    fn step(&mut self, action: Action) -> StepOutcome {
        let state = self.state();
        let r = reward(&state, action, self.mode);
        if action.is_query() {
            self.last_query = Some(self.observations[self.cursor].time);
        }
        self.cursor += 1;
        let terminal = self.cursor == self.observations.len();
        let next_state = if terminal {
            self.cursor -= 1;
            state
        } else {
            self.state()
        };
        StepOutcome {
            next_state,
            reward: r,
            terminal,
        }
    }
}

/// Several offline environments played as consecutive episodes, in order,
/// wrapping around after the last.
#[derive(Debug, Clone)]
pub struct EpisodeCycle {
    envs: Vec<OfflineEnv>,
    current: Option<usize>,
}

impl EpisodeCycle {
    pub fn new(envs: Vec<OfflineEnv>) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::Parameter("episode cycle needs at least one environment".into()));
        }
        Ok(Self { envs, current: None })
    }
}

impl Environment for EpisodeCycle {
    fn reset(&mut self) -> AgentState {
        let next = self.current.map_or(0, |c| (c + 1) % self.envs.len());
        self.current = Some(next);
        self.envs[next].reset()
    }

    fn step(&mut self, action: Action) -> StepOutcome {
        let c = self.current.expect("reset before step");
        self.envs[c].step(action)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Total reward of every completed episode.
    pub episode_rewards: Vec<f64>,
    pub steps: u64,
    /// Mean training loss over the run (zero if no update happened).
    pub mean_loss: f64,
    pub mean_abs_error: f64,
}

/// Steps between checks for a dead network.
pub const REVIVE_INTERVAL: u64 = 1000;

/// Run `steps` environment steps, restarting the environment after each
/// terminal step. Partial episodes at the end are not recorded.
pub fn train_offline(agent: &mut Agent, env: &mut impl Environment, steps: u64) -> Result<TrainingReport> {
    let mut report = TrainingReport::default();
    let mut state = env.reset();
    let mut episode = 0.0;
    let mut updates = 0usize;
    let (mut loss, mut mae) = (0.0, 0.0);
    for _ in 0..steps {
        let action = agent.explore(&state)?;
        let out = env.step(action);
        if let Some(r) = agent.observe(Transition {
            state,
            action,
            reward: out.reward,
            next_state: out.next_state,
            terminal: out.terminal,
        })? {
            updates += 1;
            loss += r.loss;
            mae += r.mae;
        }
        episode += out.reward;
        report.steps += 1;
        if agent.steps % REVIVE_INTERVAL == 0 {
            agent.revive()?;
        }
        if out.terminal {
            report.episode_rewards.push(episode);
            episode = 0.0;
            state = env.reset();
        } else {
            state = out.next_state;
        }
    }
    if updates > 0 {
        report.mean_loss = loss / updates as f64;
        report.mean_abs_error = mae / updates as f64;
    }
    log::debug!(
        "trained {} steps, {} episodes, mean loss {:.4}",
        report.steps,
        report.episode_rewards.len(),
        report.mean_loss
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uncertainty_mapping() {
        assert_eq!(uncertainty(0.5), 1.0);
        assert_eq!(uncertainty(1.0), 0.0);
        assert_eq!(uncertainty(0.0), 0.0);
    }

    #[test]
    fn state_components() {
        let mut rr = [0.5; 24];
        rr[14] = 0.8;
        let now = Timestamp::from_day_hms(2, 14, 0, 0);
        let s = state_from_observation(0.75, &rr, Some(now.plus_seconds(-2 * SECONDS_PER_HOUR)), now).unwrap();
        assert_eq!(s.uncertainty, 0.5);
        assert_eq!(s.response_rate, 0.8);
        assert_eq!(s.time_since_query, 0.5);
        assert_eq!(s.time_of_day, 14.0 / 24.0);
        let s = state_from_observation(0.75, &rr, Some(now.plus_seconds(-9 * SECONDS_PER_HOUR)), now).unwrap();
        assert_eq!(s.time_since_query, 1.0);
        assert!(state_from_observation(1.2, &rr, None, now).is_err());
    }

    #[test]
    fn reward_examples() {
        assert_eq!(uncertainty_reward(0.5), 0.5);
        let s = AgentState::neutral();
        assert_eq!(compute_reward(&s, Action::Query), 1.5);
        assert_eq!(compute_reward(&s, Action::NoQuery), 1.5);
        assert_relative_eq!(uncertainty_reward(1.0), 1.0 / (1.0 + (-10.0f64).exp()), epsilon = 1e-15);
        assert_relative_eq!(uncertainty_reward(1.0), 0.99995, epsilon = 1e-5);
    }

    #[test]
    fn greedy_ties_go_to_no_query() {
        assert_eq!(greedy_action(&[0.2, 0.9]), Action::Query);
        assert_eq!(greedy_action(&[0.3, 0.3]), Action::NoQuery);
        let net = QNetwork::zeros(&DEFAULT_WIDTHS, Regularization::default()).unwrap();
        let mut r = rng::stream(0, "t");
        assert_eq!(
            epsilon_greedy_action(&net, &AgentState::neutral(), 0.0, &mut r).unwrap(),
            Action::NoQuery
        );
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let e = EpsilonSchedule {
            start: 1.0,
            end: 0.0,
            anneal_steps: 100,
        };
        assert_eq!(e.at(0), 1.0);
        assert_eq!(e.at(50), 0.5);
        assert_eq!(e.at(100), 0.0);
        assert_eq!(e.at(1000), 0.0);
    }

    #[test]
    fn train_step_needs_warm_memory() {
        let mut agent = Agent::new(AgentConfig::default()).unwrap();
        assert!(matches!(agent.train_step(), Err(Error::NotReady { have: 0, need: 100 })));
    }

    #[test]
    fn invalid_configs() {
        let mut c = AgentConfig {
            gamma: 1.0,
            ..AgentConfig::default()
        };
        assert!(c.validate().is_err());
        c.gamma = 0.9;
        c.epsilon.end = 2.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn offline_env_episode_length_and_terminal() {
        let obs: Vec<Observation> = (0..5)
            .map(|i| Observation {
                time: Timestamp(i * 900),
                p_stress: 0.5,
            })
            .collect();
        let mut env = OfflineEnv::new(obs, [0.5; 24], RewardMode::ContextAware).unwrap();
        let s0 = env.reset();
        assert_eq!(s0.time_since_query, 1.0);
        let out = env.step(Action::Query);
        assert!(!out.terminal);
        assert_eq!(out.next_state.time_since_query, 900.0 / MAX_QUERY_GAP_S as f64);
        for _ in 0..3 {
            assert!(!env.step(Action::NoQuery).terminal);
        }
        assert!(env.step(Action::NoQuery).terminal);
    }
}
