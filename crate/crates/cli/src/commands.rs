//! Subcommand implementations. Each returns a JSON summary for stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ema_rl::error::{Error, Result};
use ema_rl::features::{encode_context, extract_hrv_features, FeatureSet};
use ema_rl::harness::{
    featurize_cohort, online_report, personalization_study, replay_offline, run_offline_study, run_online_study,
    statistical_collection, study_labels, train_online_agent, ExperimentConfig, LabelSource, SubjectData,
    ONLINE_STUDY, PHASE2_STUDY,
};
use ema_rl::models::{self, Backend, LabeledSample};
use ema_rl::policies::PolicyKind;
use ema_rl::rng;
use ema_rl::sim::synth_cohort;
use ema_rl::storage::{
    cohort_records, effective_config, load_config, read_dataset, read_decision_log, save_agent,
    save_classifier, write_curves, write_dataset, write_decision_log, write_metrics, write_table, StoredFeatures,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{BackendArg, Command, FeatureSetArg, GlobalArgs, LabelsArg, SynthLabels};

pub fn run(global: &GlobalArgs, command: &Command) -> Result<Value> {
    let mut config = if let Some(path) = &global.config {
        load_config(path)?
    } else if global.paper_scale {
        ExperimentConfig::paper_scale()
    } else {
        ExperimentConfig::default()
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
        config.cohort.seed = seed;
    }
    if let Command::SynthCohort(a) = command {
        if let Some(n) = a.subjects {
            config.cohort.subjects = n;
        }
        if let Some(d) = a.days {
            config.cohort.days = d;
        }
    }
    config.validate()?;
    let dump = effective_config(&config)?;
    log::info!("effective config:\n{dump}");
    fs::create_dir_all(&global.out)?;
    fs::write(global.out.join("effective-config.toml"), &dump)?;

    let ctx = Ctx { global, config };
    match command {
        Command::SynthCohort(a) => ctx.synth_cohort(a.no_raw, a.labels),
        Command::ExtractFeatures(a) => ctx.extract_features(&a.input, a.drop_raw),
        Command::TrainDetector(a) => ctx.train_detector(&a.input, a.feature_set, a.backend),
        Command::TrainAgent => ctx.train_agent(),
        Command::RunOffline => ctx.run_offline(),
        Command::RunOnline => ctx.run_online(),
        Command::ComparePolicies => ctx.compare_policies(),
        Command::Personalize(a) => ctx.personalize(a.labels),
        Command::ReplayLog(a) => ctx.replay_log(&a.log),
    }
}

struct Ctx<'a> {
    global: &'a GlobalArgs,
    config: ExperimentConfig,
}

/// Dataset files named by `input`: the file itself or every `.jsonl` file in
/// the directory, sorted.
fn dataset_files(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(Error::Parameter(format!("{} does not exist", input.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Parameter(format!("no .jsonl files in {}", input.display())));
    }
    Ok(files)
}

impl Ctx<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.global.out.join(name)
    }

    fn metrics_path(&self) -> PathBuf {
        self.config.metrics_path.clone().unwrap_or_else(|| self.out("metrics.csv"))
    }

    fn created(&self) -> Option<u64> {
        if self.global.deterministic {
            None
        } else {
            SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
        }
    }

    fn subjects(&self) -> Result<Vec<SubjectData>> {
        let cohort = synth_cohort(&self.config.cohort)?;
        featurize_cohort(&cohort, &self.config.conditioning)
    }

    /// Refuse to write an output over an input file.
    fn guard_output(&self, input: &Path, output: &Path) -> Result<()> {
        if output.exists() && fs::canonicalize(input)? == fs::canonicalize(output)? {
            return Err(Error::Parameter(format!(
                "output {} would overwrite its input; choose another --out",
                output.display()
            )));
        }
        Ok(())
    }

    fn synth_cohort(&self, no_raw: bool, labels: SynthLabels) -> Result<Value> {
        let subjects = self.subjects()?;
        let log = match labels {
            SynthLabels::Collected => statistical_collection(&subjects, &self.config)?,
            SynthLabels::None => Vec::new(),
        };
        let mut files = Vec::new();
        let mut total = 0;
        for s in &subjects {
            let answers = ema_rl::harness::answers_from_log(log.iter().filter(|r| r.subject_id == s.subject_id()));
            let records = cohort_records(s, &answers, !no_raw)?;
            let path = self.out(&format!("{}.jsonl", s.subject_id()));
            write_dataset(&records, &path)?;
            total += records.len();
            files.push(path.display().to_string());
        }
        Ok(json!({ "command": "synth-cohort", "files": files, "records": total }))
    }

    fn extract_features(&self, input: &Path, drop_raw: bool) -> Result<Value> {
        let mut written = Vec::new();
        let (mut featurized, mut failed) = (0usize, 0usize);
        for file in dataset_files(input)? {
            let name = file.file_name().expect("dataset file has a name");
            let output = self.global.out.join(name);
            self.guard_output(&file, &output)?;
            let mut records = read_dataset(&file)?;
            for r in &mut records {
                if let Some(window) = r.window() {
                    let window = window?;
                    let context = match &r.context {
                        Some(c) => encode_context(c)?,
                        None => {
                            return Err(Error::Parameter(format!(
                                "{}: record {}@{} has raw samples but no context",
                                file.display(),
                                r.subject_id,
                                r.timestamp.0
                            )))
                        }
                    };
                    match ema_rl::dsp::condition_window(&window, &self.config.conditioning)
                        .and_then(|nn| extract_hrv_features(&nn))
                    {
                        Ok(hrv) => {
                            r.features = Some(StoredFeatures { hrv, context });
                            featurized += 1;
                        }
                        Err(Error::InsufficientBeats { .. }) => {
                            r.features = None;
                            failed += 1;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if drop_raw && r.features.is_some() {
                    r.raw = None;
                }
            }
            records.retain(|r| r.raw.is_some() || r.features.is_some());
            write_dataset(&records, &output)?;
            written.push(output.display().to_string());
        }
        Ok(json!({
            "command": "extract-features",
            "files": written,
            "featurized": featurized,
            "insufficient_beats": failed,
        }))
    }

    fn train_detector(&self, input: &Path, set: Option<FeatureSetArg>, backend: Option<BackendArg>) -> Result<Value> {
        let set = match set {
            Some(FeatureSetArg::PpgOnly) => FeatureSet::PpgOnly,
            Some(FeatureSetArg::PpgContext) => FeatureSet::PpgContext,
            None => self.config.feature_set,
        };
        let mut classifier = self.config.classifier.clone();
        if let Some(b) = backend {
            classifier.backend = match b {
                BackendArg::BaggedTrees => Backend::BaggedTrees,
                BackendArg::BoostedTrees => Backend::BoostedTrees,
                BackendArg::LinearMargin => Backend::LinearMargin,
            };
        }
        let mut samples = Vec::new();
        for file in dataset_files(input)? {
            for r in read_dataset(&file)? {
                if r.label5.is_none() {
                    continue;
                }
                if let Some(fv) = r.feature_vector() {
                    if let Some(s) = LabeledSample::from_labeled(fv?) {
                        samples.push(s?);
                    }
                }
            }
        }
        if samples.is_empty() {
            return Err(Error::Parameter(format!(
                "{} holds no labeled records with features; run extract-features first",
                input.display()
            )));
        }
        let model = models::train(&samples, set, &classifier, rng::derive_seed(self.config.seed, "detector"))
            .map_err(|e| match e {
                Error::DegenerateTraining(m) => Error::Parameter(m),
                other => other,
            })?;
        let path = self.out("detector.emrl");
        save_classifier(&path, &model, self.created())?;
        let positives = samples.iter().filter(|s| s.label2 == 1).count();
        Ok(json!({
            "command": "train-detector",
            "model": path.display().to_string(),
            "samples": samples.len(),
            "positives": positives,
            "features": model.signature.arity(),
        }))
    }

    fn train_agent(&self) -> Result<Value> {
        let subjects = self.subjects()?;
        let agent = train_online_agent(&subjects, &self.config)?;
        let path = self.out("agent.emrl");
        save_agent(&path, &agent, self.created())?;
        Ok(json!({
            "command": "train-agent",
            "agent": path.display().to_string(),
            "steps": agent.steps(),
        }))
    }

    fn run_offline(&self) -> Result<Value> {
        let subjects = self.subjects()?;
        let run = run_offline_study(&subjects, &self.config)?;
        write_decision_log(&self.out("decisions.jsonl"), &run.log)?;
        write_metrics(&self.metrics_path(), &run.report.metric_rows())?;
        write_curves(&self.out("curves.csv"), &run.report.curve_rows())?;
        Ok(json!({
            "command": "run-offline",
            "target": run.report.target,
            "baseline_recall": run.report.baseline_recall,
            "target_recall": run.report.target_recall,
            "decisions": run.log.len(),
        }))
    }

    fn run_online(&self) -> Result<Value> {
        let subjects = self.subjects()?;
        let run = run_online_study(&subjects, &self.config)?;
        write_decision_log(&self.out("decisions.jsonl"), &run.log)?;
        write_metrics(&self.metrics_path(), &run.report.metric_rows())?;
        save_agent(&self.out("agent.emrl"), &run.agent, self.created())?;
        let f1: Vec<Value> = run
            .report
            .metrics
            .iter()
            .map(|m| json!({ "collection": m.collection, "feature_set": m.feature_set, "f1": m.cv.mean.f1 }))
            .collect();
        Ok(json!({ "command": "run-online", "decisions": run.log.len(), "mean_f1": f1 }))
    }

    fn compare_policies(&self) -> Result<Value> {
        #[derive(Serialize)]
        struct Row {
            schema_version: u32,
            level: f64,
            policy: &'static str,
            reached: usize,
            replications: usize,
            mean: Option<f64>,
            std: Option<f64>,
            censored_mean: f64,
            reduction_vs_random: Option<f64>,
        }
        let subjects = self.subjects()?;
        let run = run_offline_study(&subjects, &self.config)?;
        let report = &run.report;
        let mut rows = Vec::new();
        for q in &report.queries_needed {
            let random = report.needed(PolicyKind::Random, q.level).map(|r| r.censored_mean);
            rows.push(Row {
                schema_version: ema_rl::harness::METRICS_SCHEMA_VERSION,
                level: q.level,
                policy: q.policy.tag(),
                reached: q.per_replication.iter().filter(|n| n.is_some()).count(),
                replications: q.per_replication.len(),
                mean: q.mean,
                std: q.std,
                censored_mean: q.censored_mean,
                reduction_vs_random: random.filter(|&r| r > 0.0).map(|r| 1.0 - q.censored_mean / r),
            });
        }
        write_table(&self.out("comparison.csv"), &rows)?;
        write_metrics(&self.metrics_path(), &report.metric_rows())?;
        write_curves(&self.out("curves.csv"), &report.curve_rows())?;
        let summary: Vec<Value> = rows
            .iter()
            .map(|r| json!({ "level": r.level, "policy": r.policy, "censored_mean": r.censored_mean, "reached": r.reached }))
            .collect();
        Ok(json!({ "command": "compare-policies", "comparison": summary }))
    }

    fn personalize(&self, labels: Option<LabelsArg>) -> Result<Value> {
        let subjects = self.subjects()?;
        let source = match labels {
            Some(LabelsArg::Oracle) => LabelSource::Oracle,
            Some(LabelsArg::Collected) => LabelSource::Collected,
            None => self.config.personalization.labels,
        };
        let log = match source {
            LabelSource::Collected => Some(statistical_collection(&subjects, &self.config)?),
            LabelSource::Oracle => None,
        };
        let labels = study_labels(&subjects, source, log.as_deref())?;
        let report = personalization_study(&subjects, &self.config, &labels)?;
        write_metrics(&self.metrics_path(), &report.metric_rows())?;
        write_table(&self.out("roc.csv"), &report.roc_rows())?;
        Ok(json!({
            "command": "personalize",
            "plain_auc": report.plain.auc_roc,
            "personalized_auc": report.personalized.auc_roc,
            "subjects": report.subjects.len(),
            "skipped": report.skipped.len(),
        }))
    }

    fn replay_log(&self, log_path: &Path) -> Result<Value> {
        let log = read_decision_log(log_path)?;
        let metrics = self.metrics_path();
        self.guard_output(log_path, &metrics)?;
        let subjects = self.subjects()?;
        let study = if log.iter().any(|r| r.study == ONLINE_STUDY) {
            let report = online_report(&subjects, &self.config, &log)?;
            write_metrics(&metrics, &report.metric_rows())?;
            "online"
        } else if log.iter().any(|r| r.study == PHASE2_STUDY) {
            let report = replay_offline(&subjects, &self.config, &log)?;
            write_metrics(&metrics, &report.metric_rows())?;
            write_curves(&self.out("curves.csv"), &report.curve_rows())?;
            "offline"
        } else {
            return Err(Error::Parameter(format!(
                "{} holds no online or offline-personalization decisions",
                log_path.display()
            )));
        };
        Ok(json!({ "command": "replay-log", "study": study, "records": log.len(), "metrics": metrics.display().to_string() }))
    }
}
