//! Dataset records: one burst per line with optional raw samples, features,
//! context and self-report.
//!
//! Feature columns are stored as the twelve named HRV statistics followed by
//! the context encoding in `CONTEXT_FEATURE_NAMES` order. Models check this
//! order through their feature signature.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::jsonl::{read_jsonl, write_jsonl, Versioned};
use crate::dsp::PpgWindow;
use crate::error::{Error, Result};
use crate::features::{assemble_feature_vector, ContextSnapshot, FeatureMeta, FeatureVector, HrvFeatures};
use crate::harness::SubjectData;
use crate::sim::{label_attach, EmaAnswer};
use crate::time::Timestamp;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSamples {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredFeatures {
    pub hrv: HrvFeatures,
    pub context: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema_version: u32,
    pub subject_id: String,
    pub timestamp: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawSamples>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<StoredFeatures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label5: Option<u8>,
    pub provenance: Provenance,
}

impl Versioned for DatasetRecord {
    const SCHEMA_VERSION: u32 = DATASET_SCHEMA_VERSION;
}

impl DatasetRecord {
    pub fn validate(&self) -> Result<()> {
        if self.raw.is_none() && self.features.is_none() {
            return Err(Error::Parameter(format!(
                "record {}@{} has neither raw samples nor features",
                self.subject_id, self.timestamp.0
            )));
        }
        if let Some(l) = self.label5 {
            if !(1..=5).contains(&l) {
                return Err(Error::Parameter(format!("stress label {l} outside 1..=5")));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> Option<Result<PpgWindow>> {
        self.raw
            .as_ref()
            .map(|r| PpgWindow::new(self.subject_id.clone(), self.timestamp, r.sample_rate, r.samples.clone()))
    }

    pub fn feature_vector(&self) -> Option<Result<FeatureVector>> {
        self.features.as_ref().map(|f| {
            assemble_feature_vector(
                f.hrv,
                f.context.clone(),
                FeatureMeta {
                    subject_id: self.subject_id.clone(),
                    timestamp: self.timestamp,
                    label: self.label5,
                },
            )
        })
    }
}

pub fn write_dataset(records: &[DatasetRecord], path: &Path) -> Result<()> {
    for r in records {
        r.validate()?;
    }
    write_jsonl(path, records)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let records: Vec<DatasetRecord> = read_jsonl(path)?;
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}

/// Records for one simulated subject: raw PPG and context for every burst,
/// features where beats were detected, and the self-report attached from
/// `answers`.
pub fn cohort_records(subject: &SubjectData, answers: &[EmaAnswer], with_raw: bool) -> Result<Vec<DatasetRecord>> {
    let stream = &subject.stream;
    let mut out = Vec::with_capacity(stream.bursts.len());
    for (b, f) in stream.bursts.iter().zip(&subject.features) {
        let raw = if with_raw {
            let w = b.window(&stream.profile)?;
            Some(RawSamples {
                sample_rate: w.sample_rate,
                samples: w.samples,
            })
        } else {
            None
        };
        let features = f.as_ref().map(|f| StoredFeatures {
            hrv: f.hrv,
            context: f.context.clone(),
        });
        if raw.is_none() && features.is_none() {
            continue;
        }
        out.push(DatasetRecord {
            schema_version: DATASET_SCHEMA_VERSION,
            subject_id: stream.profile.subject_id.clone(),
            timestamp: b.time,
            raw,
            features,
            context: Some(b.context.clone()),
            label5: label_attach(b.time, answers),
            provenance: Provenance::Synthetic,
        });
    }
    Ok(out)
}
