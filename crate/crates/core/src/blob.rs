//! Content-addressed blob storage.
//!
//! On disk each blob lives at `<root>/<sha256-hex>`; storing identical bytes
//! twice yields one object.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::media::ContentHash;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("blob {0} not found")]
    NotFound(ContentHash),
    #[error("blob {hash} is corrupt: content hashes to {actual}")]
    Corrupt { hash: ContentHash, actual: ContentHash },
    #[error("blob store i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
enum Backend {
    Dir(PathBuf),
    Memory(Arc<RwLock<HashMap<ContentHash, Arc<Vec<u8>>>>>),
}

/// Cheap to clone; clones share the same storage.
#[derive(Debug, Clone)]
pub struct BlobStore {
    backend: Backend,
}

impl BlobStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, BlobError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(BlobStore { backend: Backend::Dir(dir.as_ref().to_path_buf()) })
    }

    pub fn in_memory() -> Self {
        BlobStore { backend: Backend::Memory(Arc::default()) }
    }

    pub fn put(&self, bytes: &[u8]) -> Result<ContentHash, BlobError> {
        let hash = ContentHash::of(bytes);
        match &self.backend {
            Backend::Dir(root) => {
                let path = root.join(hash.as_str());
                if !path.exists() {
                    let tmp = root.join(format!(".{}.{}.tmp", hash, uuid::Uuid::new_v4()));
                    let mut f = fs::File::create(&tmp)?;
                    f.write_all(bytes)?;
                    f.sync_all()?;
                    fs::rename(&tmp, &path)?;
                }
            }
            Backend::Memory(map) => {
                map.write()
                    .expect("blob map poisoned")
                    .entry(hash.clone())
                    .or_insert_with(|| Arc::new(bytes.to_vec()));
            }
        }
        Ok(hash)
    }

    pub fn get(&self, hash: &ContentHash) -> Result<Vec<u8>, BlobError> {
        let bytes = match &self.backend {
            Backend::Dir(root) => match fs::read(root.join(hash.as_str())) {
                Ok(b) => b,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    return Err(BlobError::NotFound(hash.clone()))
                }
                Err(e) => return Err(e.into()),
            },
            Backend::Memory(map) => map
                .read()
                .expect("blob map poisoned")
                .get(hash)
                .map(|b| b.as_ref().clone())
                .ok_or_else(|| BlobError::NotFound(hash.clone()))?,
        };
        let actual = ContentHash::of(&bytes);
        if &actual != hash {
            return Err(BlobError::Corrupt { hash: hash.clone(), actual });
        }
        Ok(bytes)
    }

    pub fn contains(&self, hash: &ContentHash) -> bool {
        match &self.backend {
            Backend::Dir(root) => root.join(hash.as_str()).is_file(),
            Backend::Memory(map) => map.read().expect("blob map poisoned").contains_key(hash),
        }
    }

    /// Number of stored objects.
    pub fn len(&self) -> Result<usize, BlobError> {
        Ok(match &self.backend {
            Backend::Dir(root) => fs::read_dir(root)?
                .filter_map(Result::ok)
                .filter(|e| e.file_name().to_str().is_some_and(|n| n.parse::<ContentHash>().is_ok()))
                .count(),
            Backend::Memory(map) => map.read().expect("blob map poisoned").len(),
        })
    }

    pub fn is_empty(&self) -> Result<bool, BlobError> {
        self.len().map(|n| n == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_bytes_dedupe() {
        let dir = tempfile::tempdir().unwrap();
        for store in [BlobStore::open(dir.path()).unwrap(), BlobStore::in_memory()] {
            let a = store.put(b"same bytes").unwrap();
            let b = store.put(b"same bytes").unwrap();
            assert_eq!(a, b);
            assert_eq!(store.len().unwrap(), 1);
            assert_eq!(store.get(&a).unwrap(), b"same bytes");
            assert!(store.contains(&a));
        }
    }

    #[test]
    fn missing_and_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::open(dir.path()).unwrap();
        let h = ContentHash::of(b"nope");
        assert!(matches!(store.get(&h), Err(BlobError::NotFound(_))));
        let good = store.put(b"payload").unwrap();
        fs::write(dir.path().join(good.as_str()), b"tampered").unwrap();
        assert!(matches!(store.get(&good), Err(BlobError::Corrupt { .. })));
    }
}
