//! Versioned artifact store with atomic publication.
//!
//! On disk each `(kind, listing_type)` pair owns a directory
//! `<kind>-<listing>/` holding `vNNNNNNNN.bin` artifacts, a `vNNNNNNNN.json`
//! manifest beside each, and a `CURRENT` file naming the served version.
//! Artifacts and manifests are written to a temporary name and renamed into
//! place before `CURRENT` is swapped the same way, so a reader following the
//! pointer never meets a partial file. In memory the current version of each
//! slot is an `ArcSwapOption`, so readers pin a snapshot with one atomic load.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use arc_swap::ArcSwapOption;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StoreError;
use crate::cohort::CohortSnapshot;
use crate::collab::FactorModel;
use crate::content::{ContentSnapshot, Horizon};
use crate::domain::{ListingType, Timestamp};
use crate::features::{FeatureSpace, FeatureSpaceFile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Cohorts,
    ContentShort,
    ContentLong,
    Collab,
    FeatureSpace,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 5] = [
        ArtifactKind::Cohorts,
        ArtifactKind::ContentShort,
        ArtifactKind::ContentLong,
        ArtifactKind::Collab,
        ArtifactKind::FeatureSpace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Cohorts => "cohorts",
            ArtifactKind::ContentShort => "content_short",
            ArtifactKind::ContentLong => "content_long",
            ArtifactKind::Collab => "collab",
            ArtifactKind::FeatureSpace => "feature_space",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown artifact kind {s:?}"))
    }
}

/// Sidecar describing one stored artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ArtifactKind,
    pub listing_type: ListingType,
    pub version: String,
    pub built_at: Timestamp,
    pub window: (Timestamp, Timestamp),
    /// Hex SHA-256 of the artifact bytes.
    pub digest: String,
    pub bytes: u64,
}

/// A published artifact with its identity.
#[derive(Debug)]
pub struct Versioned<T> {
    pub version: String,
    pub manifest: Manifest,
    pub value: T,
}

/// Something the store can publish.
pub trait Artifact: Sized + Send + Sync + 'static {
    fn kind(&self) -> ArtifactKind;
    fn listing_type(&self) -> ListingType;
    fn built_at(&self) -> Timestamp;
    fn window(&self) -> (Timestamp, Timestamp);
    fn encode(&self) -> Vec<u8>;
    fn decode(manifest: &Manifest, bytes: &[u8]) -> Result<Self, String>;
    /// Kinds this type can occupy.
    fn kinds() -> &'static [ArtifactKind];
}

impl Artifact for CohortSnapshot {
    fn kind(&self) -> ArtifactKind {
        ArtifactKind::Cohorts
    }
    fn listing_type(&self) -> ListingType {
        self.listing_type
    }
    fn built_at(&self) -> Timestamp {
        self.built_at
    }
    fn window(&self) -> (Timestamp, Timestamp) {
        self.window
    }
    fn encode(&self) -> Vec<u8> {
        bincode::serialize(self).expect("cohort snapshot encodes")
    }
    fn decode(_: &Manifest, bytes: &[u8]) -> Result<Self, String> {
        bincode::deserialize::<CohortSnapshot>(bytes).map(CohortSnapshot::reindexed).map_err(|e| e.to_string())
    }
    fn kinds() -> &'static [ArtifactKind] {
        &[ArtifactKind::Cohorts]
    }
}

impl Artifact for ContentSnapshot {
    fn kind(&self) -> ArtifactKind {
        match self.horizon {
            Horizon::ShortTerm => ArtifactKind::ContentShort,
            Horizon::LongTerm => ArtifactKind::ContentLong,
        }
    }
    fn listing_type(&self) -> ListingType {
        self.listing_type
    }
    fn built_at(&self) -> Timestamp {
        self.built_at
    }
    fn window(&self) -> (Timestamp, Timestamp) {
        self.window
    }
    fn encode(&self) -> Vec<u8> {
        bincode::serialize(self).expect("content snapshot encodes")
    }
    fn decode(_: &Manifest, bytes: &[u8]) -> Result<Self, String> {
        bincode::deserialize(bytes).map_err(|e| e.to_string())
    }
    fn kinds() -> &'static [ArtifactKind] {
        &[ArtifactKind::ContentShort, ArtifactKind::ContentLong]
    }
}

impl Artifact for FactorModel {
    fn kind(&self) -> ArtifactKind {
        ArtifactKind::Collab
    }
    fn listing_type(&self) -> ListingType {
        self.header.listing_type
    }
    fn built_at(&self) -> Timestamp {
        self.header.trained_at
    }
    fn window(&self) -> (Timestamp, Timestamp) {
        self.header.window
    }
    fn encode(&self) -> Vec<u8> {
        self.to_bytes()
    }
    fn decode(_: &Manifest, bytes: &[u8]) -> Result<Self, String> {
        FactorModel::from_bytes(bytes).map_err(|e| e.to_string())
    }
    fn kinds() -> &'static [ArtifactKind] {
        &[ArtifactKind::Collab]
    }
}

/// Feature space with the time it was published; stored as JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct PublishedSpace {
    pub space: FeatureSpace,
    pub built_at: Timestamp,
}

impl Artifact for PublishedSpace {
    fn kind(&self) -> ArtifactKind {
        ArtifactKind::FeatureSpace
    }
    fn listing_type(&self) -> ListingType {
        self.space.listing_type()
    }
    fn built_at(&self) -> Timestamp {
        self.built_at
    }
    fn window(&self) -> (Timestamp, Timestamp) {
        (self.built_at, self.built_at)
    }
    fn encode(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&self.space.to_file()).expect("feature space encodes")
    }
    fn decode(manifest: &Manifest, bytes: &[u8]) -> Result<Self, String> {
        let file: FeatureSpaceFile = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        let space = FeatureSpace::from_file(&file).map_err(|e| e.to_string())?;
        Ok(PublishedSpace { space, built_at: manifest.built_at })
    }
    fn kinds() -> &'static [ArtifactKind] {
        &[ArtifactKind::FeatureSpace]
    }
}

type Slot<T> = ArcSwapOption<Versioned<T>>;

#[derive(Default)]
struct Slots {
    cohorts: [Slot<CohortSnapshot>; 2],
    content_short: [Slot<ContentSnapshot>; 2],
    content_long: [Slot<ContentSnapshot>; 2],
    collab: [Slot<FactorModel>; 2],
    feature_space: [Slot<PublishedSpace>; 2],
}

/// Maps an artifact type onto its in-memory slot.
pub trait Slotted: Artifact {
    #[doc(hidden)]
    fn slot(store: &SnapshotStore, kind: ArtifactKind, listing_type: ListingType) -> &ArcSwapOption<Versioned<Self>>;
}

impl Slotted for CohortSnapshot {
    fn slot(store: &SnapshotStore, _: ArtifactKind, lt: ListingType) -> &ArcSwapOption<Versioned<Self>> {
        &store.slots.cohorts[lt.index()]
    }
}

impl Slotted for ContentSnapshot {
    fn slot(store: &SnapshotStore, kind: ArtifactKind, lt: ListingType) -> &ArcSwapOption<Versioned<Self>> {
        match kind {
            ArtifactKind::ContentShort => &store.slots.content_short[lt.index()],
            _ => &store.slots.content_long[lt.index()],
        }
    }
}

impl Slotted for FactorModel {
    fn slot(store: &SnapshotStore, _: ArtifactKind, lt: ListingType) -> &ArcSwapOption<Versioned<Self>> {
        &store.slots.collab[lt.index()]
    }
}

impl Slotted for PublishedSpace {
    fn slot(store: &SnapshotStore, _: ArtifactKind, lt: ListingType) -> &ArcSwapOption<Versioned<Self>> {
        &store.slots.feature_space[lt.index()]
    }
}

pub struct SnapshotStore {
    root: Option<PathBuf>,
    retention: usize,
    slots: Slots,
    /// Next version number per (kind, listing); also serializes publishers.
    counters: Mutex<[[u64; 2]; 5]>,
}

fn version_name(n: u64) -> String {
    format!("v{n:08}")
}

fn parse_version(name: &str) -> Option<u64> {
    name.strip_prefix('v')?.parse().ok()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| StoreError::io(&tmp, e))?;
        f.sync_all().map_err(|e| StoreError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

impl SnapshotStore {
    pub fn in_memory() -> Self {
        SnapshotStore { root: None, retention: usize::MAX, slots: Slots::default(), counters: Mutex::new([[1; 2]; 5]) }
    }

    /// Opens a store directory and loads every current artifact, verifying digests.
    pub fn open(root: impl Into<PathBuf>, retention: usize) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| StoreError::io(&root, e))?;
        let store = SnapshotStore {
            root: Some(root),
            retention: retention.max(1),
            slots: Slots::default(),
            counters: Mutex::new([[1; 2]; 5]),
        };
        for kind in ArtifactKind::ALL {
            for lt in ListingType::ALL {
                let versions = store.stored_versions(kind, lt)?;
                if let Some(&max) = versions.last() {
                    store.counters.lock()[kind.index()][lt.index()] = max + 1;
                }
                if let Some(current) = store.current_version_on_disk(kind, lt)? {
                    match kind {
                        ArtifactKind::Cohorts => store.restore::<CohortSnapshot>(kind, lt, &current)?,
                        ArtifactKind::ContentShort | ArtifactKind::ContentLong => {
                            store.restore::<ContentSnapshot>(kind, lt, &current)?
                        }
                        ArtifactKind::Collab => store.restore::<FactorModel>(kind, lt, &current)?,
                        ArtifactKind::FeatureSpace => store.restore::<PublishedSpace>(kind, lt, &current)?,
                    }
                }
            }
        }
        Ok(store)
    }

    fn restore<T: Slotted>(&self, kind: ArtifactKind, lt: ListingType, version: &str) -> Result<(), StoreError> {
        let v = self.load_version::<T>(kind, lt, version)?;
        T::slot(self, kind, lt).store(Some(v));
        Ok(())
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn retention(&self) -> usize {
        self.retention
    }

    fn dir_for(&self, kind: ArtifactKind, lt: ListingType) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(format!("{}-{}", kind.as_str(), lt.as_str())))
    }

    fn stored_versions(&self, kind: ArtifactKind, lt: ListingType) -> Result<Vec<u64>, StoreError> {
        let Some(dir) = self.dir_for(kind, lt) else { return Ok(Vec::new()) };
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out: Vec<u64> = fs::read_dir(&dir)
            .map_err(|e| StoreError::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                parse_version(name.strip_suffix(".bin")?)
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    fn current_version_on_disk(&self, kind: ArtifactKind, lt: ListingType) -> Result<Option<String>, StoreError> {
        let Some(dir) = self.dir_for(kind, lt) else { return Ok(None) };
        let path = dir.join("CURRENT");
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s.trim().to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(StoreError::io(&path, e)),
        }
    }

    /// Serializes, digests, persists and atomically makes `artifact` current.
    pub fn publish<T: Slotted>(&self, artifact: T) -> Result<Arc<Versioned<T>>, StoreError> {
        let kind = artifact.kind();
        let lt = artifact.listing_type();
        let bytes = artifact.encode();
        let mut counters = self.counters.lock();
        let n = counters[kind.index()][lt.index()];
        let version = version_name(n);
        let manifest = Manifest {
            kind,
            listing_type: lt,
            version: version.clone(),
            built_at: artifact.built_at(),
            window: artifact.window(),
            digest: digest(&bytes),
            bytes: bytes.len() as u64,
        };
        if let Some(dir) = self.dir_for(kind, lt) {
            fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
            write_atomic(&dir.join(format!("{version}.bin")), &bytes)?;
            let json = serde_json::to_vec_pretty(&manifest).expect("manifest encodes");
            write_atomic(&dir.join(format!("{version}.json")), &json)?;
            write_atomic(&dir.join("CURRENT"), version.as_bytes())?;
            self.prune(&dir, n)?;
        }
        counters[kind.index()][lt.index()] = n + 1;
        let published = Arc::new(Versioned { version, manifest, value: artifact });
        T::slot(self, kind, lt).store(Some(published.clone()));
        Ok(published)
    }

    fn prune(&self, dir: &Path, newest: u64) -> Result<(), StoreError> {
        let keep_from = newest.saturating_sub(self.retention as u64 - 1);
        for entry in fs::read_dir(dir).map_err(|e| StoreError::io(dir, e))?.flatten() {
            let name = entry.file_name().into_string().unwrap_or_default();
            let stem = name.strip_suffix(".bin").or_else(|| name.strip_suffix(".json"));
            if let Some(n) = stem.and_then(parse_version) {
                if n < keep_from {
                    let path = entry.path();
                    fs::remove_file(&path).map_err(|e| StoreError::io(&path, e))?;
                }
            }
        }
        Ok(())
    }

    /// The served version, pinned by one atomic load.
    pub fn current<T: Slotted>(&self, kind: ArtifactKind, lt: ListingType) -> Option<Arc<Versioned<T>>> {
        debug_assert!(T::kinds().contains(&kind));
        T::slot(self, kind, lt).load_full()
    }

    /// Manifest of the served version.
    pub fn current_manifest(&self, kind: ArtifactKind, lt: ListingType) -> Option<Manifest> {
        match kind {
            ArtifactKind::Cohorts => self.current::<CohortSnapshot>(kind, lt).map(|v| v.manifest.clone()),
            ArtifactKind::ContentShort | ArtifactKind::ContentLong => {
                self.current::<ContentSnapshot>(kind, lt).map(|v| v.manifest.clone())
            }
            ArtifactKind::Collab => self.current::<FactorModel>(kind, lt).map(|v| v.manifest.clone()),
            ArtifactKind::FeatureSpace => self.current::<PublishedSpace>(kind, lt).map(|v| v.manifest.clone()),
        }
    }

    /// Versions still on disk, oldest first.
    pub fn versions(&self, kind: ArtifactKind, lt: ListingType) -> Result<Vec<String>, StoreError> {
        Ok(self.stored_versions(kind, lt)?.into_iter().map(version_name).collect())
    }

    /// Reads a retained version from disk and checks it against its manifest.
    pub fn load_version<T: Artifact>(
        &self,
        kind: ArtifactKind,
        lt: ListingType,
        version: &str,
    ) -> Result<Arc<Versioned<T>>, StoreError> {
        let dir = self.dir_for(kind, lt).ok_or(StoreError::NotPersistent)?;
        let bin = dir.join(format!("{version}.bin"));
        let json = dir.join(format!("{version}.json"));
        let unknown = || StoreError::UnknownVersion { kind: kind.to_string(), version: version.to_string() };
        let bytes = fs::read(&bin).map_err(|e| if e.kind() == std::io::ErrorKind::NotFound { unknown() } else { StoreError::io(&bin, e) })?;
        let manifest: Manifest = serde_json::from_slice(&fs::read(&json).map_err(|e| StoreError::io(&json, e))?)
            .map_err(|e| StoreError::Decode { kind: kind.to_string(), version: version.to_string(), message: e.to_string() })?;
        let actual = digest(&bytes);
        if actual != manifest.digest {
            return Err(StoreError::DigestMismatch {
                kind: kind.to_string(),
                version: version.to_string(),
                expected: manifest.digest,
                actual,
            });
        }
        let value = T::decode(&manifest, &bytes)
            .map_err(|message| StoreError::Decode { kind: kind.to_string(), version: version.to_string(), message })?;
        Ok(Arc::new(Versioned { version: version.to_string(), manifest, value }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::BinConfig;

    fn space(at: Timestamp) -> PublishedSpace {
        PublishedSpace { space: FeatureSpace::new(ListingType::Rent, BinConfig::default()), built_at: at }
    }

    fn cohorts(at: Timestamp) -> CohortSnapshot {
        CohortSnapshot::new(ListingType::Buy, at, (0, at), BinConfig::default(), Default::default())
    }

    #[test]
    fn publish_then_current_same_digest() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path(), 3).unwrap();
        let v = store.publish(cohorts(5)).unwrap();
        let cur = store.current::<CohortSnapshot>(ArtifactKind::Cohorts, ListingType::Buy).unwrap();
        assert_eq!(cur.manifest.digest, v.manifest.digest);
        assert_eq!(cur.version, "v00000001");
        assert!(store.current::<CohortSnapshot>(ArtifactKind::Cohorts, ListingType::Rent).is_none());
    }

    #[test]
    fn retention_prunes_oldest_and_reopen_restores() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = SnapshotStore::open(dir.path(), 3).unwrap();
            for t in 1..=4 {
                store.publish(cohorts(t)).unwrap();
            }
            assert_eq!(store.versions(ArtifactKind::Cohorts, ListingType::Buy).unwrap(), ["v00000002", "v00000003", "v00000004"]);
            store.publish(space(9)).unwrap();
        }
        let store = SnapshotStore::open(dir.path(), 3).unwrap();
        let cur = store.current::<CohortSnapshot>(ArtifactKind::Cohorts, ListingType::Buy).unwrap();
        assert_eq!((cur.version.as_str(), cur.value.built_at), ("v00000004", 4));
        let sp = store.current::<PublishedSpace>(ArtifactKind::FeatureSpace, ListingType::Rent).unwrap();
        assert_eq!(sp.value, space(9));
        assert_eq!(store.publish(cohorts(5)).unwrap().version, "v00000005");
    }

    #[test]
    fn tampered_artifact_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path(), 3).unwrap();
        store.publish(cohorts(1)).unwrap();
        let bin = dir.path().join("cohorts-buy").join("v00000001.bin");
        let mut bytes = fs::read(&bin).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&bin, bytes).unwrap();
        let err = store.load_version::<CohortSnapshot>(ArtifactKind::Cohorts, ListingType::Buy, "v00000001").unwrap_err();
        assert!(matches!(err, StoreError::DigestMismatch { .. }));
        assert!(SnapshotStore::open(dir.path(), 3).is_err());
    }
}
