//! On-disk formats: line-delimited JSON datasets and decision logs, a
//! checksummed container for trained models and agents, TOML experiment
//! configs and CSV metric tables.

mod artifact;
mod config;
mod dataset;
mod jsonl;
mod tables;

pub use artifact::{
    load_agent, load_classifier, read_artifact, save_agent, save_classifier, write_artifact, ArtifactHeader,
    ArtifactKind, ARTIFACT_FORMAT_VERSION, ARTIFACT_MAGIC,
};
pub use config::{effective_config, load_config, parse_config};
pub use dataset::{
    cohort_records, read_dataset, write_dataset, DatasetRecord, Provenance, RawSamples, StoredFeatures,
    DATASET_SCHEMA_VERSION,
};
pub use jsonl::{read_decision_log, read_jsonl, write_decision_log, write_jsonl, Versioned};
pub use tables::{read_metrics, write_curves, write_metrics, write_table};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Write `bytes` to a sibling temporary file and rename it into place, so
/// readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
