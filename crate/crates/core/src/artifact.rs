//! Schema-versioned JSON artifacts.
//!
//! Every pipeline phase persists its output as a JSON file wrapping
//! the payload in an envelope with a `schema` tag. Readers refuse
//! files carrying the wrong tag, so a v2 format change can never be
//! silently misread as v1. Writes are atomic (temp file + rename) and
//! return the content checksum so manifests can record it without a
//! second pass over the file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const GRAPH_SCHEMA: &str = "reposum/graph/v1";
pub const SUMMARIES_SCHEMA: &str = "reposum/summaries/v1";
pub const MATRIX_SCHEMA: &str = "reposum/ss-matrix/v1";
pub const CLUSTERS_SCHEMA: &str = "reposum/clusters/v1";
pub const FEATURES_SCHEMA: &str = "reposum/features/v1";
pub const TRACE_LINKS_SCHEMA: &str = "reposum/trace-links/v1";
pub const DOC_TREE_SCHEMA: &str = "reposum/doc-tree/v1";
pub const MANIFEST_SCHEMA: &str = "reposum/manifest/v1";
pub const EVAL_REPORT_SCHEMA: &str = "reposum/eval-report/v1";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: expected schema {expected:?}, found {found:?}")]
    SchemaMismatch { path: String, expected: String, found: String },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
}

impl ArtifactError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        ArtifactError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

/// The on-disk shape of every artifact: a schema tag plus payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: String,
    pub payload: T,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

pub fn sha256_file(path: &Path) -> Result<String, ArtifactError> {
    let bytes = fs::read(path).map_err(|e| ArtifactError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf);
    if let Some(dir) = &parent {
        fs::create_dir_all(dir).map_err(|e| ArtifactError::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| ArtifactError::io(path, "path has no file name"))?;
    let tmp: PathBuf = path.with_file_name(format!(
        ".{file_name}.tmp.{}.{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0)
    ));
    let mut file = fs::File::create(&tmp).map_err(|e| ArtifactError::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| ArtifactError::io(&tmp, e))?;
    file.sync_all().map_err(|e| ArtifactError::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| ArtifactError::io(path, e))
}

/// Serializes `payload` under `schema` and writes it atomically.
/// Returns the sha256 of the written bytes.
pub fn write_json<T: Serialize>(
    path: &Path,
    schema: &str,
    payload: &T,
) -> Result<String, ArtifactError> {
    let envelope = Envelope { schema: schema.to_string(), payload };
    let mut bytes = serde_json::to_vec_pretty(&envelope)
        .map_err(|e| ArtifactError::Malformed { path: path.display().to_string(), message: e.to_string() })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)?;
    Ok(sha256_bytes(&bytes))
}

/// Reads an artifact, insisting on the expected schema tag.
pub fn read_json<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(|e| ArtifactError::io(path, e))?;
    let envelope: Envelope<serde_json::Value> = serde_json::from_str(&text).map_err(|e| {
        ArtifactError::Malformed { path: path.display().to_string(), message: e.to_string() }
    })?;
    if envelope.schema != schema {
        return Err(ArtifactError::SchemaMismatch {
            path: path.display().to_string(),
            expected: schema.to_string(),
            found: envelope.schema,
        });
    }
    serde_json::from_value(envelope.payload).map_err(|e| ArtifactError::Malformed {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
