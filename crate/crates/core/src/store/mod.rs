//! Embedded storage: clickstream event log, per-user activity index, versioned
//! snapshot store and the retrain scheduler.

mod activity;
mod event_log;
mod files;
mod scheduler;
mod snapshot;

pub use activity::ActivityIndex;
pub use event_log::{segment_name, EventLog, SEGMENT_PREFIX};
pub use files::{load_catalog, read_jsonl, save_catalog, write_jsonl};
pub use scheduler::{Clock, JobKind, Scheduler, SimulatedClock, SystemClock};
pub use snapshot::{digest, Artifact, ArtifactKind, Manifest, PublishedSpace, Slotted, SnapshotStore, Versioned};

use thiserror::Error;

use crate::domain::EventRejection;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage is full")]
    StorageFull,
    #[error("event failed validation: {0}")]
    ValidationFailed(#[from] EventRejection),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    CorruptSegment { path: String, line: usize, message: String },
    #[error("digest mismatch for {kind} {version}: manifest {expected}, content {actual}")]
    DigestMismatch { kind: String, version: String, expected: String, actual: String },
    #[error("cannot decode {kind} {version}: {message}")]
    Decode { kind: String, version: String, message: String },
    #[error("no {kind} version {version} in the store")]
    UnknownVersion { kind: String, version: String },
    #[error("catalog is invalid: {0}")]
    InvalidCatalog(String),
    #[error("snapshot store has no directory; historical versions are unavailable")]
    NotPersistent,
}

impl StoreError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::StorageFull {
            return StoreError::StorageFull;
        }
        StoreError::Io { path: path.display().to_string(), source }
    }
}
