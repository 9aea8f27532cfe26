use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ImageryError, Result};
use crate::request::View;

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedImage {
    pub address_id: String,
    pub view: View,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
    pub fetched_at_unix: u64,
    pub provider: String,
    /// Relative to the cache root.
    pub path: PathBuf,
}

/// One current record per `(address_id, view)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CacheEntry {
    Image(CachedImage),
    Missing {
        address_id: String,
        view: View,
        fetched_at_unix: u64,
        provider: String,
    },
}

impl CacheEntry {
    fn key(&self) -> (String, View) {
        match self {
            CacheEntry::Image(c) => (c.address_id.clone(), c.view),
            CacheEntry::Missing { address_id, view, .. } => (address_id.clone(), *view),
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn safe_component(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// `root/<address_id>/<view>.<ext>` plus `root/index.json`.
pub struct ImageCache {
    root: PathBuf,
    index: Mutex<BTreeMap<(String, View), CacheEntry>>,
    key_locks: Mutex<HashMap<(String, View), Arc<Mutex<()>>>>,
}

impl ImageCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| ImageryError::io(&root, e))?;
        let index_path = root.join(INDEX_FILE);
        let entries: Vec<CacheEntry> = if index_path.exists() {
            let text = fs::read_to_string(&index_path).map_err(|e| ImageryError::io(&index_path, e))?;
            serde_json::from_str(&text)?
        } else {
            Vec::new()
        };
        Ok(Self {
            root,
            index: Mutex::new(entries.into_iter().map(|e| (e.key(), e)).collect()),
            key_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> Vec<CacheEntry> {
        self.index.lock().values().cloned().collect()
    }

    /// Lock serializing fetch-and-write for one key.
    pub(crate) fn key_lock(&self, address_id: &str, view: View) -> Arc<Mutex<()>> {
        self.key_locks
            .lock()
            .entry((address_id.to_string(), view))
            .or_default()
            .clone()
    }

    pub fn get(&self, address_id: &str, view: View) -> Option<CacheEntry> {
        self.index.lock().get(&(address_id.to_string(), view)).cloned()
    }

    /// Reads a cached image back, verifying its hash.
    pub fn read(&self, image: &CachedImage) -> Result<Vec<u8>> {
        let path = self.root.join(&image.path);
        let bytes = fs::read(&path).map_err(|e| ImageryError::io(&path, e))?;
        if sha256_hex(&bytes) != image.sha256 {
            return Err(ImageryError::CorruptCache {
                address_id: image.address_id.clone(),
                view: image.view.to_string(),
            });
        }
        Ok(bytes)
    }

    /// Stores bytes verbatim and records them in the index.
    pub fn put_image(
        &self,
        address_id: &str,
        view: View,
        extension: &str,
        bytes: &[u8],
        provider: &str,
        fetched_at_unix: u64,
    ) -> Result<CachedImage> {
        if !safe_component(address_id) {
            return Err(ImageryError::InvalidRequest(format!(
                "address id `{address_id}` cannot be used as a cache path"
            )));
        }
        if !extension.chars().all(|c| c.is_ascii_alphanumeric()) || extension.is_empty() {
            return Err(ImageryError::InvalidRequest(format!("bad extension `{extension}`")));
        }
        let dir = self.root.join(address_id);
        fs::create_dir_all(&dir).map_err(|e| ImageryError::io(&dir, e))?;
        let rel = PathBuf::from(address_id).join(format!("{view}.{extension}"));
        let path = self.root.join(&rel);
        let tmp = path.with_extension(format!("{extension}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| ImageryError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ImageryError::io(&path, e))?;
        let image = CachedImage {
            address_id: address_id.to_string(),
            view,
            sha256: sha256_hex(bytes),
            fetched_at_unix,
            provider: provider.to_string(),
            path: rel,
        };
        self.record(CacheEntry::Image(image.clone()))?;
        Ok(image)
    }

    pub fn put_missing(&self, address_id: &str, view: View, provider: &str, fetched_at_unix: u64) -> Result<()> {
        self.record(CacheEntry::Missing {
            address_id: address_id.to_string(),
            view,
            fetched_at_unix,
            provider: provider.to_string(),
        })
    }

    fn record(&self, entry: CacheEntry) -> Result<()> {
        let mut index = self.index.lock();
        if let Some(CacheEntry::Image(old)) = index.get(&entry.key()) {
            let replaced = matches!(&entry, CacheEntry::Image(new) if new.path == old.path);
            if !replaced {
                let stale = self.root.join(&old.path);
                let _ = fs::remove_file(stale);
            }
        }
        index.insert(entry.key(), entry);
        let list: Vec<&CacheEntry> = index.values().collect();
        let path = self.root.join(INDEX_FILE);
        let tmp = self.root.join(format!("{INDEX_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&list)?).map_err(|e| ImageryError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ImageryError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ImageCache::open(dir.path()).unwrap();
        let img = cache
            .put_image("SYN-000001", View::Street, "jpg", b"\xff\xd8bytes", "fixture", 5)
            .unwrap();
        assert_eq!(img.path, PathBuf::from("SYN-000001/street.jpg"));
        assert_eq!(cache.read(&img).unwrap(), b"\xff\xd8bytes");
        cache.put_missing("SYN-000002", View::Street, "fixture", 6).unwrap();

        let reopened = ImageCache::open(dir.path()).unwrap();
        assert_eq!(reopened.entries(), cache.entries());
        assert!(matches!(
            reopened.get("SYN-000002", View::Street),
            Some(CacheEntry::Missing { .. })
        ));
    }

    #[test]
    fn tampered_file_fails_hash_check() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ImageCache::open(dir.path()).unwrap();
        let img = cache.put_image("A", View::Satellite, "png", b"abc", "t", 0).unwrap();
        fs::write(dir.path().join(&img.path), b"abd").unwrap();
        assert!(matches!(cache.read(&img), Err(ImageryError::CorruptCache { .. })));
    }

    #[test]
    fn path_traversal_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ImageCache::open(dir.path()).unwrap();
        assert!(cache.put_image("../x", View::Street, "jpg", b"", "t", 0).is_err());
        assert!(cache.put_image("a/b", View::Street, "jpg", b"", "t", 0).is_err());
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
