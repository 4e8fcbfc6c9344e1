use std::fs;

use ema_rl::agent::{Agent, AgentConfig, AgentState};
use ema_rl::error::Error;
use ema_rl::features::{ContextSnapshot, FeatureSet, HrvFeatures, CONTEXT_FEATURE_NAMES};
use ema_rl::models::{self, Backend, ClassifierConfig, Dataset};
use ema_rl::rng::{self, Rng};
use ema_rl::storage::{
    load_agent, load_classifier, read_dataset, read_decision_log, save_agent, save_classifier, write_dataset,
    write_decision_log, DatasetRecord, Provenance, RawSamples, StoredFeatures, DATASET_SCHEMA_VERSION,
};
use ema_rl::time::Timestamp;
use rand::Rng as _;

/// Floats spanning many magnitudes, including ones without short decimal forms.
fn awkward(r: &mut Rng) -> f64 {
    let m: f64 = r.random_range(-1.0..1.0);
    m * 10f64.powi(r.random_range(-300..300))
}

fn random_record(r: &mut Rng, i: usize) -> DatasetRecord {
    let with_raw = r.random_bool(0.5);
    let with_features = !with_raw || r.random_bool(0.5);
    let h: Vec<f64> = (0..12).map(|_| awkward(r)).collect();
    DatasetRecord {
        schema_version: DATASET_SCHEMA_VERSION,
        subject_id: format!("s{:02}", i % 7),
        timestamp: Timestamp(r.random_range(-1_000_000..10_000_000)),
        raw: with_raw.then(|| RawSamples {
            sample_rate: 20.0,
            samples: (0..r.random_range(1..40)).map(|_| awkward(r)).collect(),
        }),
        features: with_features.then(|| StoredFeatures {
            hrv: HrvFeatures {
                bpm: h[0],
                ibi: h[1],
                sdnn: h[2],
                sdsd: h[3],
                rmssd: h[4],
                pnn20: h[5],
                pnn50: h[6],
                hr_mad: h[7],
                sd1: h[8],
                sd2: h[9],
                s: h[10],
                br: h[11],
            },
            context: (0..CONTEXT_FEATURE_NAMES.len()).map(|_| awkward(r)).collect(),
        }),
        context: r.random_bool(0.5).then(|| ContextSnapshot {
            battery_level: r.random(),
            hour: r.random_range(0.0..24.0),
            latitude: awkward(r),
            ..ContextSnapshot::default()
        }),
        label5: r.random_bool(0.5).then(|| r.random_range(1..=5)),
        provenance: if r.random_bool(0.5) { Provenance::Synthetic } else { Provenance::Imported },
    }
}

#[test]
fn dataset_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let mut r = rng::stream(3, "records");
    let records: Vec<DatasetRecord> = (0..1000).map(|i| random_record(&mut r, i)).collect();
    write_dataset(&records, &path).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), records);
}

#[test]
fn truncated_and_future_files_are_rejected_precisely() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let mut r = rng::stream(4, "records");
    let records: Vec<DatasetRecord> = (0..5).map(|i| random_record(&mut r, i)).collect();
    write_dataset(&records, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() - 10]).unwrap();
    assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 5, .. })));

    let future = text.replacen("\"schema_version\":1", "\"schema_version\":2", 1);
    fs::write(&path, future).unwrap();
    assert!(matches!(read_dataset(&path), Err(Error::Migration { found: 2, supported: 1 })));
}

#[test]
fn records_need_raw_or_features() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng::stream(5, "records");
    let mut rec = random_record(&mut r, 0);
    rec.raw = None;
    rec.features = None;
    assert!(write_dataset(&[rec], &dir.path().join("x.jsonl")).is_err());
}

fn trained(set: FeatureSet, backend: Backend) -> (ema_rl::models::TrainedClassifier, Vec<Vec<f64>>) {
    let mut r = rng::stream(6, "model");
    let arity = set.arity();
    let rows: Vec<Vec<f64>> = (0..120).map(|_| (0..arity).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<u8> = rows.iter().map(|x| u8::from(x[0] + 0.3 * x[1] > 0.0)).collect();
    let data = Dataset::new(rows.clone(), labels, set.signature()).unwrap();
    let mut config = ClassifierConfig::with_backend(backend);
    config.forest.trees = 25;
    (models::train_matrix(&data, &config, 9).unwrap(), rows)
}

#[test]
fn classifier_round_trip_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    for backend in [Backend::BaggedTrees, Backend::BoostedTrees, Backend::LinearMargin] {
        let (model, rows) = trained(FeatureSet::PpgContext, backend);
        let path = dir.path().join(format!("{}.emrl", backend.tag()));
        save_classifier(&path, &model, None).unwrap();
        let loaded = load_classifier(&path, Some(&FeatureSet::PpgContext.signature())).unwrap();
        for row in rows.iter().take(100) {
            let a = model.predict_proba_row(row).unwrap();
            let b = loaded.predict_proba_row(row).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn corrupted_and_incompatible_artifacts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained(FeatureSet::PpgOnly, Backend::BaggedTrees);
    let path = dir.path().join("m.emrl");
    save_classifier(&path, &model, Some(1_700_000_000)).unwrap();
    assert!(matches!(
        load_classifier(&path, Some(&FeatureSet::PpgContext.signature())),
        Err(Error::Compatibility(_))
    ));

    let bytes = fs::read(&path).unwrap();
    for at in [0, 9, bytes.len() / 2, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[at] ^= 0x01;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_classifier(&path, None), Err(Error::Corruption(_))), "byte {at}");
    }
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_classifier(&path, None), Err(Error::Corruption(_))));

    fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_agent(&path), Err(Error::Compatibility(_))));
}

#[test]
fn agent_round_trip_decides_identically() {
    let dir = tempfile::tempdir().unwrap();
    let agent = Agent::new(AgentConfig::default()).unwrap();
    let path = dir.path().join("a.emrl");
    save_agent(&path, &agent, None).unwrap();
    let loaded = load_agent(&path).unwrap();
    assert_eq!(loaded, agent);
    let mut r = rng::stream(7, "states");
    for _ in 0..100 {
        let s = AgentState::new(r.random(), r.random(), r.random(), r.random()).unwrap();
        let (a, b) = (agent.q_values(&s).unwrap(), loaded.q_values(&s).unwrap());
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        assert_eq!(agent.greedy(&s).unwrap(), loaded.greedy(&s).unwrap());
    }
}

#[test]
fn deterministic_artifacts_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained(FeatureSet::PpgOnly, Backend::BoostedTrees);
    let (a, b) = (dir.path().join("a.emrl"), dir.path().join("b.emrl"));
    save_classifier(&a, &model, None).unwrap();
    save_classifier(&b, &model, None).unwrap();
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn decision_log_round_trip() {
    use ema_rl::harness::{statistical_collection, ExperimentConfig};
    let mut config = ExperimentConfig::default();
    config.cohort.subjects = 2;
    config.cohort.days = 3;
    let cohort = ema_rl::sim::synth_cohort(&config.cohort).unwrap();
    let subjects = ema_rl::harness::featurize_cohort(&cohort, &config.conditioning).unwrap();
    let log = statistical_collection(&subjects, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    write_decision_log(&path, &log).unwrap();
    assert_eq!(read_decision_log(&path).unwrap(), log);
}
