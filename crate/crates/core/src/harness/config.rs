//! Experiment configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::dsp::ConditioningConfig;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::models::{Backend, ClassifierConfig, ForestParams};
use crate::policies::{DensityConfig, PolicyKind, DAILY_CAP, FORCED_EXPLORATION, RECALIBRATION_INTERVAL};
use crate::sim::CohortConfig;

/// Offline study: statistical collection, then day-by-day personalization
/// of one held-out subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineConfig {
    /// Subject to personalize; the one with the most collected labels when
    /// unset.
    pub target: Option<String>,
    /// Trailing fraction of the target's bursts held out for testing.
    pub test_fraction: f64,
    /// Weight of the target's own labels relative to population labels.
    pub personal_weight: f64,
    /// Fraction of the way from baseline recall to the best policy's mean
    /// final recall that defines the mid target.
    pub target_fraction: f64,
    /// Extra recall levels for queries-to-performance curves.
    pub levels: Vec<f64>,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            target: None,
            test_fraction: 0.25,
            personal_weight: 1.0,
            target_fraction: 0.5,
            levels: Vec::new(),
        }
    }
}

/// Online study: real-time context-aware collection on every subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    /// Events between classifier retrains.
    pub retrain_cadence: u32,
    pub recalibration_interval: u32,
    pub forced_exploration: f64,
    /// Agent exploration at deployment.
    pub epsilon: f64,
    pub folds: usize,
    pub personal_weight: f64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            retrain_cadence: 100,
            recalibration_interval: RECALIBRATION_INTERVAL,
            forced_exploration: FORCED_EXPLORATION,
            epsilon: 0.0,
            folds: 4,
            personal_weight: 1.0,
        }
    }
}

/// Where personalization-study labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Every usable burst, labeled with the latent stress state.
    Oracle,
    /// Answers collected by the statistical policy.
    Collected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonalizationConfig {
    pub labels: LabelSource,
    /// Weight of the held-out subject's first half.
    pub personal_weight: f64,
}

impl Default for PersonalizationConfig {
    fn default() -> Self {
        Self {
            labels: LabelSource::Oracle,
            personal_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: u32,
    pub cohort: CohortConfig,
    /// Policies compared in the offline study.
    pub policies: Vec<PolicyKind>,
    pub feature_set: FeatureSet,
    pub classifier: ClassifierConfig,
    pub agent: AgentConfig,
    pub conditioning: ConditioningConfig,
    pub density: DensityConfig,
    pub daily_cap: u32,
    pub offline: OfflineConfig,
    pub online: OnlineConfig,
    pub personalization: PersonalizationConfig,
    pub metrics_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 20,
            cohort: CohortConfig::default(),
            policies: vec![PolicyKind::Random, PolicyKind::TraditionalAl, PolicyKind::ContextAwareAl],
            feature_set: FeatureSet::PpgContext,
            classifier: ClassifierConfig::with_backend(Backend::BaggedTrees),
            agent: AgentConfig::default(),
            conditioning: ConditioningConfig::default(),
            density: DensityConfig::default(),
            daily_cap: DAILY_CAP,
            offline: OfflineConfig::default(),
            online: OnlineConfig::default(),
            personalization: PersonalizationConfig::default(),
            metrics_path: None,
        }
    }
}

impl ExperimentConfig {
    /// 34 subjects over 20 days, 100 replications and 200,000 agent steps.
    pub fn paper_scale() -> Self {
        let mut c = Self {
            replications: 100,
            cohort: CohortConfig::paper_scale(),
            agent: AgentConfig::paper_scale(),
            ..Self::default()
        };
        c.classifier.forest = ForestParams::paper_scale();
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        self.cohort.validate()?;
        self.agent.validate()?;
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy must be selected".into()));
        }
        if self.policies.contains(&PolicyKind::Statistical) {
            return Err(Error::Config(
                "the statistical policy collects the phase-1 pool and cannot be compared in phase 2".into(),
            ));
        }
        let o = &self.offline;
        if !(o.test_fraction > 0.0 && o.test_fraction < 1.0) {
            return Err(Error::Config(format!("offline.test_fraction must lie in (0, 1), got {}", o.test_fraction)));
        }
        if !(o.personal_weight > 0.0) || !(self.online.personal_weight > 0.0) || !(self.personalization.personal_weight > 0.0) {
            return Err(Error::Config("personal weights must be positive".into()));
        }
        if !(0.0..=1.0).contains(&o.target_fraction) || o.levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Config("recall levels must lie in [0, 1]".into()));
        }
        let n = &self.online;
        if !(0.0..=1.0).contains(&n.forced_exploration) || !(0.0..=1.0).contains(&n.epsilon) {
            return Err(Error::Config("online exploration rates must lie in [0, 1]".into()));
        }
        if n.folds < 2 {
            return Err(Error::Config("online.folds must be at least 2".into()));
        }
        if self.daily_cap == 0 {
            return Err(Error::Config("daily_cap must be at least 1".into()));
        }
        Ok(())
    }
}
