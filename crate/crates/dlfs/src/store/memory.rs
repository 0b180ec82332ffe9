//! In-memory object store backend.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use super::{content_etag, range_slice, unix_now, ObjectKey, ObjectMeta, ObjectStore, Result, StoreError};

#[derive(Clone)]
struct Stored {
    data: Arc<Vec<u8>>,
    meta: ObjectMeta,
}

/// Object store held entirely in process memory.
///
/// Objects live in a sorted map so `list` is a plain range scan. Each object
/// is an `Arc` swapped wholesale on put, which gives atomic replacement:
/// a reader that grabbed the old `Arc` keeps consistent old bytes.
#[derive(Default)]
pub struct MemoryStore {
    objects: RwLock<BTreeMap<(String, String), Stored>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn lookup(&self, key: &ObjectKey) -> Result<Stored> {
        self.objects
            .read()
            .expect("store lock poisoned")
            .get(&(key.bucket.clone(), key.key.clone()))
            .cloned()
            .ok_or_else(|| StoreError::NotFound(key.clone()))
    }
}

impl ObjectStore for MemoryStore {
    fn put(&self, key: &ObjectKey, data: &[u8]) -> Result<ObjectMeta> {
        let meta = ObjectMeta {
            size: data.len() as u64,
            etag: content_etag(data),
            mtime: unix_now(),
        };
        let stored = Stored {
            data: Arc::new(data.to_vec()),
            meta: meta.clone(),
        };
        self.objects
            .write()
            .expect("store lock poisoned")
            .insert((key.bucket.clone(), key.key.clone()), stored);
        Ok(meta)
    }

    fn get_range(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<Vec<u8>> {
        let stored = self.lookup(key)?;
        Ok(range_slice(&stored.data, offset, length)?.to_vec())
    }

    fn get_range_tagged(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<(Vec<u8>, String)> {
        let stored = self.lookup(key)?;
        let bytes = range_slice(&stored.data, offset, length)?.to_vec();
        Ok((bytes, stored.meta.etag))
    }

    fn list(&self, bucket: &str, prefix: &str) -> Result<Vec<ObjectKey>> {
        let objects = self.objects.read().expect("store lock poisoned");
        Ok(objects
            .range((bucket.to_string(), prefix.to_string())..)
            .take_while(|((b, k), _)| b == bucket && k.starts_with(prefix))
            .map(|((b, k), _)| ObjectKey {
                bucket: b.clone(),
                key: k.clone(),
            })
            .collect())
    }

    fn head(&self, key: &ObjectKey) -> Result<ObjectMeta> {
        Ok(self.lookup(key)?.meta)
    }
}
