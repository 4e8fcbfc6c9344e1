//! Checksummed container for trained classifiers and agents.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `EMRL` |
//! | 4 | container format version |
//! | 4 | header length `h` |
//! | h | header JSON ([`ArtifactHeader`]) |
//! | 8 | payload length `p` |
//! | p | payload JSON |
//! | 32 | SHA-256 of every preceding byte |

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::Agent;
use crate::error::{Error, Result};
use crate::features::FeatureSignature;
use crate::models::TrainedClassifier;

pub const ARTIFACT_MAGIC: &[u8; 4] = b"EMRL";
pub const ARTIFACT_FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Classifier,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub kind: ArtifactKind,
    /// Input columns the payload was trained on.
    pub signature: FeatureSignature,
    pub crate_version: String,
    /// Seconds since the Unix epoch; absent in deterministic runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

fn agent_signature() -> FeatureSignature {
    FeatureSignature {
        names: ["uncertainty", "response_rate", "time_since_query", "time_of_day"]
            .into_iter()
            .map(String::from)
            .collect(),
    }
}

pub fn write_artifact<T: Serialize>(path: &Path, header: &ArtifactHeader, payload: &T) -> Result<()> {
    let header = serde_json::to_vec(header)?;
    let payload = serde_json::to_vec(payload)?;
    let mut out = Vec::with_capacity(header.len() + payload.len() + 52);
    out.extend_from_slice(ARTIFACT_MAGIC);
    out.extend_from_slice(&ARTIFACT_FORMAT_VERSION.to_le_bytes());
    let header_len = u32::try_from(header.len()).map_err(|_| Error::Parameter("artifact header too large".into()))?;
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    super::write_atomic(path, &out)
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = at
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Corruption(format!("truncated at byte {at}")))?;
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

/// Verify the checksum and container version, then decode header and payload.
pub fn read_artifact<T: DeserializeOwned>(path: &Path) -> Result<(ArtifactHeader, T)> {
    let (header, payload) = open(path)?;
    Ok((header, decode(&payload)?))
}

fn decode<T: DeserializeOwned>(payload: &[u8]) -> Result<T> {
    serde_json::from_slice(payload).map_err(|e| Error::Corruption(format!("payload: {e}")))
}

fn open(path: &Path) -> Result<(ArtifactHeader, Vec<u8>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 + 4 + 4 + 8 + DIGEST_LEN || &bytes[..4] != ARTIFACT_MAGIC {
        return Err(Error::Corruption(format!("{} is not an artifact container", path.display())));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Corruption(format!("{}: checksum mismatch", path.display())));
    }
    let mut at = 4;
    let version = u32::from_le_bytes(take(body, &mut at, 4)?.try_into().expect("4 bytes"));
    if version != ARTIFACT_FORMAT_VERSION {
        return Err(Error::Migration {
            found: version,
            supported: ARTIFACT_FORMAT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(take(body, &mut at, 4)?.try_into().expect("4 bytes")) as usize;
    let header: ArtifactHeader = serde_json::from_slice(take(body, &mut at, header_len)?)
        .map_err(|e| Error::Corruption(format!("header: {e}")))?;
    let payload_len = u64::from_le_bytes(take(body, &mut at, 8)?.try_into().expect("8 bytes"));
    let payload_len = usize::try_from(payload_len).map_err(|_| Error::Corruption("payload length".into()))?;
    let payload = take(body, &mut at, payload_len)?.to_vec();
    if at != body.len() {
        return Err(Error::Corruption(format!("{} trailing bytes", body.len() - at)));
    }
    Ok((header, payload))
}

fn expect_kind(header: &ArtifactHeader, kind: ArtifactKind) -> Result<()> {
    if header.kind != kind {
        return Err(Error::Compatibility(format!("expected a {kind:?} artifact, found {:?}", header.kind)));
    }
    Ok(())
}

pub fn save_classifier(path: &Path, model: &TrainedClassifier, created_unix: Option<u64>) -> Result<()> {
    let header = ArtifactHeader {
        kind: ArtifactKind::Classifier,
        signature: model.signature.clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix,
    };
    write_artifact(path, &header, model)
}

/// Load a classifier; with `expected`, also require that its feature
/// signature matches the data it will be applied to.
pub fn load_classifier(path: &Path, expected: Option<&FeatureSignature>) -> Result<TrainedClassifier> {
    let (header, payload) = open(path)?;
    expect_kind(&header, ArtifactKind::Classifier)?;
    let model: TrainedClassifier = decode(&payload)?;
    if header.signature != model.signature {
        return Err(Error::Corruption("header and payload signatures differ".into()));
    }
    if let Some(expected) = expected {
        model.signature.check(expected)?;
    }
    Ok(model)
}

pub fn save_agent(path: &Path, agent: &Agent, created_unix: Option<u64>) -> Result<()> {
    let header = ArtifactHeader {
        kind: ArtifactKind::Agent,
        signature: agent_signature(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix,
    };
    write_artifact(path, &header, agent)
}

pub fn load_agent(path: &Path) -> Result<Agent> {
    let (header, payload) = open(path)?;
    expect_kind(&header, ArtifactKind::Agent)?;
    agent_signature().check(&header.signature)?;
    decode(&payload)
}
