//! CSV metric and curve tables.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{CurveRow, MetricRow, METRICS_SCHEMA_VERSION};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parameter(format!("csv: {other:?}")),
    }
}

fn to_csv<T: serde::Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Floats are written in shortest round-trip form, so equal metrics give
/// byte-identical files.
pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    super::write_atomic(path, &to_csv(rows)?)
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    write_table(path, rows)
}

pub fn write_table<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    super::write_atomic(path, &to_csv(rows)?)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<MetricRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        if row.schema_version != METRICS_SCHEMA_VERSION {
            return Err(Error::Migration {
                found: row.schema_version,
                supported: METRICS_SCHEMA_VERSION,
            });
        }
        out.push(row);
    }
    Ok(out)
}
