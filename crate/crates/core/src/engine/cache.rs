use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::media::{ContentHash, MediaValue};

/// Memoization key: (spec_id, params hash, input hashes).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub spec_id: String,
    pub params_hash: ContentHash,
    pub input_hashes: Vec<ContentHash>,
}

impl CacheKey {
    pub fn digest(&self) -> ContentHash {
        let mut parts: Vec<&str> = vec![&self.spec_id, self.params_hash.as_str()];
        parts.extend(self.input_hashes.iter().map(ContentHash::as_str));
        ContentHash::combine(parts)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: CacheKey,
    value: MediaValue,
}

#[derive(Debug, Clone)]
enum Backend {
    Dir(PathBuf),
    Memory(Arc<RwLock<HashMap<CacheKey, MediaValue>>>),
}

/// Outputs of deterministic adapters, persisted as one JSON file per key.
#[derive(Debug, Clone)]
pub struct OutputCache {
    backend: Backend,
}

impl OutputCache {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(OutputCache { backend: Backend::Dir(dir.as_ref().to_path_buf()) })
    }

    pub fn in_memory() -> Self {
        OutputCache { backend: Backend::Memory(Arc::default()) }
    }

    pub fn get(&self, key: &CacheKey) -> Option<MediaValue> {
        match &self.backend {
            Backend::Dir(root) => {
                let text = fs::read_to_string(root.join(format!("{}.json", key.digest()))).ok()?;
                let entry: CacheEntry = serde_json::from_str(&text).ok()?;
                (&entry.key == key).then_some(entry.value)
            }
            Backend::Memory(map) => map.read().expect("cache poisoned").get(key).cloned(),
        }
    }

    pub fn put(&self, key: &CacheKey, value: &MediaValue) -> io::Result<()> {
        match &self.backend {
            Backend::Dir(root) => {
                let entry = CacheEntry { key: key.clone(), value: value.clone() };
                let path = root.join(format!("{}.json", key.digest()));
                let tmp = root.join(format!(".{}.tmp", uuid::Uuid::new_v4()));
                fs::write(&tmp, serde_json::to_vec(&entry).map_err(io::Error::other)?)?;
                fs::rename(tmp, path)
            }
            Backend::Memory(map) => {
                map.write().expect("cache poisoned").insert(key.clone(), value.clone());
                Ok(())
            }
        }
    }
}
