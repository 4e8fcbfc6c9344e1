//! Flat rows for the metrics and curve files.

use serde::{Deserialize, Serialize};

use super::offline::OfflineReport;
use super::online::OnlineReport;
use super::personalize::PersonalizationReport;
use crate::features::FeatureSet;
use crate::models::EvalMetrics;

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const CURVES_SCHEMA_VERSION: u32 = 1;

/// One metric value. Columns that do not apply are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub schema_version: u32,
    pub study: String,
    pub policy: String,
    pub subject: Option<String>,
    pub replication: Option<u32>,
    pub step: Option<u32>,
    pub queries_used: Option<u32>,
    pub level: Option<f64>,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(study: &str, policy: &str, metric: &str, value: f64) -> Self {
        Self {
            schema_version: METRICS_SCHEMA_VERSION,
            study: study.to_string(),
            policy: policy.to_string(),
            subject: None,
            replication: None,
            step: None,
            queries_used: None,
            level: None,
            metric: metric.to_string(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub schema_version: u32,
    pub policy: String,
    pub queries_used: u32,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub schema_version: u32,
    pub model: String,
    pub fpr: f64,
    pub tpr: f64,
}

fn eval_rows(study: &str, policy: &str, subject: Option<&str>, m: &EvalMetrics) -> Vec<MetricRow> {
    let mut out = Vec::new();
    for (name, v) in [("f1", Some(m.f1)), ("precision", Some(m.precision)), ("recall", Some(m.recall)), ("auc_roc", m.auc_roc)] {
        if let Some(v) = v {
            let mut r = MetricRow::new(study, policy, name, v);
            r.subject = subject.map(String::from);
            out.push(r);
        }
    }
    out
}

impl OfflineReport {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        const STUDY: &str = "offline";
        let mut rows = vec![
            MetricRow::new(STUDY, "baseline", "recall", self.baseline_recall),
            MetricRow::new(STUDY, "all_collected", "recall", self.full_recall),
            MetricRow::new(STUDY, "target", "recall", self.target_recall),
        ];
        for r in &mut rows {
            r.subject = Some(self.target.clone());
        }
        for (policy, trajs) in &self.trajectories {
            for (rep, t) in trajs.iter().enumerate() {
                for p in t {
                    let mut r = MetricRow::new(STUDY, policy.tag(), "recall", p.recall);
                    r.subject = Some(self.target.clone());
                    r.replication = Some(rep as u32);
                    r.step = Some(p.step);
                    r.queries_used = Some(p.queries_used);
                    rows.push(r);
                }
            }
        }
        for q in &self.queries_needed {
            for (rep, n) in q.per_replication.iter().enumerate() {
                if let Some(n) = n {
                    let mut r = MetricRow::new(STUDY, q.policy.tag(), "queries_to_level", f64::from(*n));
                    r.replication = Some(rep as u32);
                    r.level = Some(q.level);
                    rows.push(r);
                }
            }
            let mut push = |metric: &str, v: f64| {
                let mut r = MetricRow::new(STUDY, q.policy.tag(), metric, v);
                r.level = Some(q.level);
                rows.push(r);
            };
            if let (Some(m), Some(s)) = (q.mean, q.std) {
                push("queries_to_level_mean", m);
                push("queries_to_level_std", s);
            }
            push("queries_to_level_censored_mean", q.censored_mean);
            push("saturated_replications", q.per_replication.iter().filter(|n| n.is_none()).count() as f64);
        }
        rows
    }

    pub fn curve_rows(&self) -> Vec<CurveRow> {
        self.curves
            .iter()
            .flat_map(|c| {
                c.points.iter().map(|p| CurveRow {
                    schema_version: CURVES_SCHEMA_VERSION,
                    policy: c.policy.tag().to_string(),
                    queries_used: p.queries_used,
                    mean: p.mean,
                    std: p.std,
                })
            })
            .collect()
    }
}

fn set_tag(set: FeatureSet) -> &'static str {
    match set {
        FeatureSet::PpgOnly => "ppg_only",
        FeatureSet::PpgContext => "ppg_context",
    }
}

impl OnlineReport {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        const STUDY: &str = "online";
        let mut rows = Vec::new();
        for s in &self.subjects {
            for (name, v) in [
                ("prompts", s.prompts as f64),
                ("answered", s.answered as f64),
                ("labels", s.labels as f64),
                ("max_daily_prompts", f64::from(s.max_daily_prompts)),
            ] {
                let mut r = MetricRow::new(STUDY, "context_aware_al", name, v);
                r.subject = Some(s.subject_id.clone());
                rows.push(r);
            }
        }
        for m in &self.metrics {
            let policy = format!("{}:{}", m.collection, set_tag(m.feature_set));
            rows.push(MetricRow::new(STUDY, &policy, "samples", m.samples as f64));
            rows.push(MetricRow::new(STUDY, &policy, "positives", m.positives as f64));
            for (fold, f) in m.cv.folds.iter().enumerate() {
                for mut r in eval_rows(STUDY, &policy, None, f) {
                    r.replication = Some(fold as u32);
                    rows.push(r);
                }
            }
            let mean = &m.cv.mean;
            for (name, v) in [("f1", Some(mean.f1)), ("precision", Some(mean.precision)), ("recall", Some(mean.recall)), ("auc_roc", mean.auc_roc)] {
                if let Some(v) = v {
                    rows.push(MetricRow::new(STUDY, &policy, &format!("mean_{name}"), v));
                }
            }
        }
        rows
    }
}

impl PersonalizationReport {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        const STUDY: &str = "personalization";
        let mut rows = Vec::new();
        for s in &self.subjects {
            rows.extend(eval_rows(STUDY, "plain", Some(&s.subject_id), &s.plain));
            rows.extend(eval_rows(STUDY, "personalized", Some(&s.subject_id), &s.personalized));
        }
        rows.extend(eval_rows(STUDY, "plain", None, &self.plain));
        rows.extend(eval_rows(STUDY, "personalized", None, &self.personalized));
        rows
    }

    /// Pooled ROC points of both models.
    pub fn roc_rows(&self) -> Vec<RocRow> {
        [("plain", &self.plain_roc), ("personalized", &self.personalized_roc)]
            .into_iter()
            .flat_map(|(model, roc)| {
                roc.iter().map(move |&(fpr, tpr)| RocRow {
                    schema_version: CURVES_SCHEMA_VERSION,
                    model: model.to_string(),
                    fpr,
                    tpr,
                })
            })
            .collect()
    }
}
