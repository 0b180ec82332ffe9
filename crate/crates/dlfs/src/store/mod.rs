//! Blob storage with whole-object writes and ranged reads.
//!
//! Objects are immutable blobs addressed by `(bucket, key)`. A put replaces
//! the whole object atomically; readers see either the old or the new
//! content, never a mix. Reads are byte ranges with HTTP semantics: a range
//! that starts past the end of the object is an error, a range that merely
//! runs past the end is truncated.

mod dir;
mod memory;
mod sim;

pub use dir::DirStore;
pub use memory::MemoryStore;
pub use sim::{NetworkModel, SimulatedStore};

use std::sync::Arc;

use crate::fnv;

/// Address of an object: a bucket name plus a path-like key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct ObjectKey {
    pub bucket: String,
    pub key: String,
}

impl ObjectKey {
    /// Build a key, validating the invariants: the key must be non-empty,
    /// must not start with `/`, and must not contain empty, `.` or `..`
    /// segments.
    pub fn new(bucket: impl Into<String>, key: impl Into<String>) -> Result<Self> {
        let bucket = bucket.into();
        let key = key.into();
        if bucket.is_empty() {
            return Err(StoreError::InvalidKey("empty bucket".into()));
        }
        if key.is_empty() {
            return Err(StoreError::InvalidKey("empty key".into()));
        }
        if key.starts_with('/') {
            return Err(StoreError::InvalidKey(format!(
                "key {key:?} has a leading separator"
            )));
        }
        for segment in key.split('/') {
            if segment.is_empty() {
                return Err(StoreError::InvalidKey(format!(
                    "key {key:?} has an empty segment"
                )));
            }
            if segment == "." || segment == ".." {
                return Err(StoreError::InvalidKey(format!(
                    "key {key:?} has a relative segment"
                )));
            }
        }
        Ok(ObjectKey { bucket, key })
    }
}

impl std::fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.bucket, self.key)
    }
}

/// Object attributes returned by `put` and `head`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ObjectMeta {
    /// Stored size in bytes.
    pub size: u64,
    /// FNV-1a content hash in hex; a deterministic function of the bytes.
    pub etag: String,
    /// Write time in whole seconds.
    pub mtime: i64,
}

pub fn content_etag(data: &[u8]) -> String {
    fnv::etag_hex(fnv::fnv1a64(data))
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("object not found: {0}")]
    NotFound(ObjectKey),
    #[error("range start {offset} is at or past object size {size}")]
    RangeStart { offset: u64, size: u64 },
    #[error("invalid object key: {0}")]
    InvalidKey(String),
    #[error("backend unavailable: {0}")]
    Backend(String),
    #[error("storage backend I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StoreError>;

/// Uniform blob-storage interface.
///
/// Implementations are safe for concurrent use by many readers and writers;
/// `put` is atomic per key and `get_range` never blocks on unrelated keys.
pub trait ObjectStore: Send + Sync {
    /// Store `data` under `key`, replacing any previous object atomically.
    fn put(&self, key: &ObjectKey, data: &[u8]) -> Result<ObjectMeta>;

    /// Read up to `length` bytes starting at `offset`.
    ///
    /// Returns `min(length, size - offset)` bytes; an offset at or past the
    /// end of the object is a range error, matching HTTP 416 behavior.
    fn get_range(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<Vec<u8>>;

    /// Like [`get_range`](Self::get_range), but also returns the etag of the
    /// content the range was served from, the way an HTTP range response
    /// carries an `ETag` header.
    fn get_range_tagged(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<(Vec<u8>, String)>;

    /// All keys in `bucket` starting with `prefix`, lexicographically sorted,
    /// each exactly once.
    fn list(&self, bucket: &str, prefix: &str) -> Result<Vec<ObjectKey>>;

    /// Object metadata without transferring content.
    fn head(&self, key: &ObjectKey) -> Result<ObjectMeta>;

    /// Fetch a whole object. Empty objects are served from `head` alone since
    /// no byte range of an empty object is satisfiable.
    fn get(&self, key: &ObjectKey) -> Result<Vec<u8>> {
        let meta = self.head(key)?;
        if meta.size == 0 {
            return Ok(Vec::new());
        }
        self.get_range(key, 0, meta.size)
    }
}

impl<S: ObjectStore + ?Sized> ObjectStore for Arc<S> {
    fn put(&self, key: &ObjectKey, data: &[u8]) -> Result<ObjectMeta> {
        (**self).put(key, data)
    }
    fn get_range(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<Vec<u8>> {
        (**self).get_range(key, offset, length)
    }
    fn get_range_tagged(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<(Vec<u8>, String)> {
        (**self).get_range_tagged(key, offset, length)
    }
    fn list(&self, bucket: &str, prefix: &str) -> Result<Vec<ObjectKey>> {
        (**self).list(bucket, prefix)
    }
    fn head(&self, key: &ObjectKey) -> Result<ObjectMeta> {
        (**self).head(key)
    }
    fn get(&self, key: &ObjectKey) -> Result<Vec<u8>> {
        (**self).get(key)
    }
}

/// Slice a full object the way `get_range` must: start past the end errors,
/// overlong ranges truncate.
pub(crate) fn range_slice(data: &[u8], offset: u64, length: u64) -> Result<&[u8]> {
    let size = data.len() as u64;
    if offset >= size {
        return Err(StoreError::RangeStart { offset, size });
    }
    let end = offset.saturating_add(length).min(size);
    Ok(&data[offset as usize..end as usize])
}

pub(crate) fn unix_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}
