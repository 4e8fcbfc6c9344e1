//! Studies on synthetic cohorts: offline collection and personalization,
//! online collection, and personalization evaluation.

mod collect;
mod config;
mod curves;
mod data;
mod offline;
mod online;
mod personalize;
mod report;

pub use collect::{
    answers_from_log, attach_labels, ema_stream, run_collection, CollectionOutcome, CollectionSpec, DecisionRecord,
    RecentPrompts, LOG_SCHEMA_VERSION,
};
pub use config::{ExperimentConfig, LabelSource, OfflineConfig, OnlineConfig, PersonalizationConfig};
pub use curves::{
    mean_std, queries_to_performance_curve, queries_to_reach, recall_curve, CurvePoint, PolicyCurve, QueriesNeeded,
    Trajectory, TrajectoryPoint,
};
pub use data::{featurize_burst, featurize_cohort, featurize_subject, SubjectData};
pub use offline::{
    labels_from_log, pretrain_agent, rates_from_log, replay_offline, run_offline_study, statistical_collection,
    OfflineReport, OfflineRun, OfflineSetup, PHASE1_STUDY, PHASE2_STUDY,
};
pub use online::{
    online_report, pretrain_online_agent, run_online_study, train_online_agent, CollectionMetrics, OnlineReport, OnlineRun, SubjectSummary,
    ONLINE_STUDY,
};
pub use personalize::{personalization_study, study_labels, temporal_halves, PersonalizationReport, SubjectComparison};
pub use report::{CurveRow, MetricRow, RocRow, CURVES_SCHEMA_VERSION, METRICS_SCHEMA_VERSION};
