//! Line-delimited JSON with a per-record schema version.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{DecisionRecord, LOG_SCHEMA_VERSION};

/// A record type stamped with the schema version it was written under.
pub trait Versioned {
    const SCHEMA_VERSION: u32;
}

impl Versioned for DecisionRecord {
    const SCHEMA_VERSION: u32 = LOG_SCHEMA_VERSION;
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    super::write_atomic(path, &out)
}

/// Read records, checking each line's `schema_version` before decoding it.
/// Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned + Versioned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| parse_err(n, e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| parse_err(n, "missing schema_version".into()))?;
        if version != u64::from(T::SCHEMA_VERSION) {
            return Err(Error::Migration {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                supported: T::SCHEMA_VERSION,
            });
        }
        out.push(serde_json::from_value(value).map_err(|e| parse_err(n, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_decision_log(path: &Path, log: &[DecisionRecord]) -> Result<()> {
    write_jsonl(path, log)
}

pub fn read_decision_log(path: &Path) -> Result<Vec<DecisionRecord>> {
    read_jsonl(path)
}
