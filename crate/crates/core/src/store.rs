//! On-disk workspace: `<dir>/mosaics/*.json`, `<dir>/blobs/<hash>`,
//! `<dir>/runs/*.json` and `<dir>/cache/`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blob::{BlobError, BlobStore};
use crate::catalog::Catalog;
use crate::engine::{OutputCache, RunRecord};
use crate::mosaic::{InstanceId, MosaicGraph};

pub const DOCUMENT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },
    #[error("document format version {found} is newer than supported version {supported}")]
    VersionTooNew { found: u64, supported: u32 },
    #[error("document `{id}` is corrupt: {reason}")]
    CorruptDocument { id: String, reason: String },
    #[error("version conflict: expected {expected}, stored is {found}")]
    VersionConflict { expected: u64, found: u64 },
    #[error("`{0}` is not a valid id")]
    InvalidId(String),
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error("workspace i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosaicDocument {
    pub format_version: u32,
    pub id: String,
    /// Incremented on every save; PUTs must name the version they edited.
    pub version: u64,
    #[serde(default)]
    pub title: String,
    pub created_at: DateTime<Utc>,
    pub modified_at: DateTime<Utc>,
    pub catalog_fingerprint: String,
    pub mosaic: MosaicGraph,
}

impl MosaicDocument {
    pub fn new(id: impl Into<String>, title: impl Into<String>, catalog: &Catalog, mosaic: MosaicGraph) -> Self {
        let now = Utc::now();
        MosaicDocument {
            format_version: DOCUMENT_FORMAT_VERSION,
            id: id.into(),
            version: 1,
            title: title.into(),
            created_at: now,
            modified_at: now,
            catalog_fingerprint: catalog.fingerprint().to_string(),
            mosaic,
        }
    }

    /// Parses a document, distinguishing future formats from damage.
    pub fn from_json(id_hint: &str, text: &str) -> Result<Self, StoreError> {
        let corrupt = |reason: String| StoreError::CorruptDocument { id: id_hint.to_string(), reason };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt("missing format_version".into()))?;
        if found > u64::from(DOCUMENT_FORMAT_VERSION) {
            return Err(StoreError::VersionTooNew { found, supported: DOCUMENT_FORMAT_VERSION });
        }
        serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))
    }

    /// Pieces whose spec the catalog does not know. They stay in the graph.
    pub fn unknown_pieces(&self, catalog: &Catalog) -> Vec<UnknownPiece> {
        unknown_pieces(&self.mosaic, catalog)
    }

    pub fn fingerprint_matches(&self, catalog: &Catalog) -> bool {
        self.catalog_fingerprint == catalog.fingerprint()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownPiece {
    pub instance: InstanceId,
    pub spec_id: String,
}

pub fn unknown_pieces(graph: &MosaicGraph, catalog: &Catalog) -> Vec<UnknownPiece> {
    graph
        .pieces()
        .filter(|p| !catalog.contains(&p.spec_id))
        .map(|p| UnknownPiece { instance: p.instance_id, spec_id: p.spec_id.clone() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub id: String,
    pub title: String,
    pub version: u64,
    pub modified_at: DateTime<Utc>,
}

fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("workspace file has a parent");
    let tmp = dir.join(format!(".{}.tmp", uuid::Uuid::new_v4()));
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    blobs: BlobStore,
    cache: OutputCache,
}

impl Workspace {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("mosaics"))?;
        fs::create_dir_all(root.join("runs"))?;
        let blobs = BlobStore::open(root.join("blobs"))?;
        let cache = OutputCache::open(root.join("cache"))?;
        Ok(Workspace { root, blobs, cache })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn cache(&self) -> &OutputCache {
        &self.cache
    }

    fn mosaic_path(&self, id: &str) -> PathBuf {
        self.root.join("mosaics").join(format!("{id}.json"))
    }

    fn run_path(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(format!("{id}.json"))
    }

    /// Stores a new document under a fresh id.
    pub fn create_mosaic(&self, title: &str, catalog: &Catalog, mosaic: MosaicGraph) -> Result<MosaicDocument, StoreError> {
        let doc = MosaicDocument::new(uuid::Uuid::new_v4().simple().to_string(), title, catalog, mosaic);
        self.write_document(&doc)?;
        Ok(doc)
    }

    pub fn save_mosaic(&self, graph: &MosaicGraph, title: &str, catalog: &Catalog) -> Result<String, StoreError> {
        Ok(self.create_mosaic(title, catalog, graph.clone())?.id)
    }

    pub fn load_mosaic(&self, id: &str) -> Result<MosaicGraph, StoreError> {
        Ok(self.load_document(id)?.mosaic)
    }

    pub fn load_document(&self, id: &str) -> Result<MosaicDocument, StoreError> {
        check_id(id)?;
        let text = match fs::read_to_string(self.mosaic_path(id)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound { kind: "mosaic", id: id.to_string() })
            }
            Err(e) => return Err(e.into()),
        };
        let doc = MosaicDocument::from_json(id, &text)?;
        if doc.id != id {
            return Err(StoreError::CorruptDocument { id: id.into(), reason: format!("file holds id `{}`", doc.id) });
        }
        Ok(doc)
    }

    /// Replaces a document's graph and title if `expected_version` is the
    /// stored version; bumps the version.
    pub fn update_mosaic(
        &self,
        id: &str,
        expected_version: u64,
        title: Option<&str>,
        catalog: &Catalog,
        mosaic: MosaicGraph,
    ) -> Result<MosaicDocument, StoreError> {
        let mut doc = self.load_document(id)?;
        if doc.version != expected_version {
            return Err(StoreError::VersionConflict { expected: expected_version, found: doc.version });
        }
        doc.version += 1;
        doc.modified_at = Utc::now();
        doc.catalog_fingerprint = catalog.fingerprint().to_string();
        if let Some(t) = title {
            doc.title = t.to_string();
        }
        doc.mosaic = mosaic;
        self.write_document(&doc)?;
        Ok(doc)
    }

    pub fn write_document(&self, doc: &MosaicDocument) -> Result<(), StoreError> {
        check_id(&doc.id)?;
        let bytes = serde_json::to_vec_pretty(doc).map_err(io::Error::other)?;
        write_atomic(&self.mosaic_path(&doc.id), &bytes)?;
        Ok(())
    }

    pub fn list_mosaics(&self) -> Result<Vec<DocumentSummary>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("mosaics"))? {
            let path = entry?.path();
            let Some(id) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".json")) else {
                continue;
            };
            if check_id(id).is_err() {
                continue;
            }
            if let Ok(doc) = self.load_document(id) {
                out.push(DocumentSummary { id: doc.id, title: doc.title, version: doc.version, modified_at: doc.modified_at });
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    pub fn save_run(&self, record: &RunRecord) -> Result<(), StoreError> {
        check_id(&record.run_id)?;
        let bytes = serde_json::to_vec_pretty(record).map_err(io::Error::other)?;
        write_atomic(&self.run_path(&record.run_id), &bytes)?;
        Ok(())
    }

    pub fn load_run(&self, id: &str) -> Result<RunRecord, StoreError> {
        check_id(id)?;
        let text = match fs::read_to_string(self.run_path(id)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound { kind: "run", id: id.to_string() })
            }
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text).map_err(|e| StoreError::CorruptDocument { id: id.into(), reason: e.to_string() })
    }
}
