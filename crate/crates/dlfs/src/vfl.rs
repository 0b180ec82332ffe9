//! Virtual file layer: file reads on top of object range requests.
//!
//! `open`/`read_at`/`stat`/`readdir` are answered from two places only:
//! the metadata service (for everything namespace-shaped) and the object
//! store (for block-aligned range reads). Blocks land in one global LRU
//! cache shared by every handle; sequential access triggers read-ahead of
//! the following blocks. A block being fetched is fetched once —
//! concurrent requesters wait for the same fill.
//!
//! Every backend request is aligned: its offset is a multiple of the block
//! size and its length is exactly one block, except the final block of an
//! object, which is short.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Condvar, Mutex};

use crate::meta::{FileKind, FileMeta, MetaError, Metastore};
use crate::store::{ObjectKey, ObjectStore, StoreError};

pub const DEFAULT_BLOCK_SIZE: u64 = 4 << 20;
pub const DEFAULT_READAHEAD_BLOCKS: u32 = 1;
pub const DEFAULT_CACHE_CAPACITY: u64 = 256 << 20;

pub const BLOCK_SIZE_ENV: &str = "DLFS_BLOCK_SIZE";
pub const READAHEAD_ENV: &str = "DLFS_READAHEAD";
pub const CACHE_BYTES_ENV: &str = "DLFS_CACHE_BYTES";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct VflConfig {
    /// Fetch/cache granularity in bytes; a power of two, at least 4096.
    pub block_size: u64,
    /// Blocks to prefetch after a sequential read is detected.
    pub readahead_blocks: u32,
    /// Cache capacity in bytes; at least one block.
    pub cache_capacity: u64,
}

impl Default for VflConfig {
    fn default() -> Self {
        VflConfig {
            block_size: DEFAULT_BLOCK_SIZE,
            readahead_blocks: DEFAULT_READAHEAD_BLOCKS,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

impl VflConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.block_size.is_power_of_two() || self.block_size < 4096 {
            return Err(VflError::Config(format!(
                "block_size {} must be a power of two >= 4096",
                self.block_size
            )));
        }
        if self.cache_capacity < self.block_size {
            return Err(VflError::Config(format!(
                "cache_capacity {} smaller than one block ({})",
                self.cache_capacity, self.block_size
            )));
        }
        Ok(())
    }

    /// Apply `DLFS_BLOCK_SIZE`, `DLFS_READAHEAD` and `DLFS_CACHE_BYTES`
    /// on top of `self`.
    pub fn overridden_from_env(mut self) -> Result<Self> {
        fn parse<T: std::str::FromStr>(var: &str) -> Result<Option<T>> {
            match std::env::var(var) {
                Ok(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| VflError::Config(format!("bad {var}: {v:?}"))),
                Err(_) => Ok(None),
            }
        }
        if let Some(bs) = parse::<u64>(BLOCK_SIZE_ENV)? {
            self.block_size = bs;
        }
        if let Some(ra) = parse::<u32>(READAHEAD_ENV)? {
            self.readahead_blocks = ra;
        }
        if let Some(cap) = parse::<u64>(CACHE_BYTES_ENV)? {
            self.cache_capacity = cap;
        }
        self.validate()?;
        Ok(self)
    }
}

/// Monotone counters since mount.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct CacheStats {
    /// Demand block lookups served from cache.
    pub hits: u64,
    /// Demand block lookups that had to fetch.
    pub misses: u64,
    /// Range requests issued to the object store (demand + read-ahead).
    pub backend_requests: u64,
    /// Bytes returned by those requests.
    pub backend_bytes: u64,
}

/// An open file. Holds the resolved object, the size observed at open,
/// the sequential-detection cursor, and the content version pinned at the
/// first block fetch. Not for simultaneous use by two threads; it may
/// freely move between threads.
#[derive(Debug)]
pub struct FileHandle {
    path: String,
    object: ObjectKey,
    size: u64,
    prev_end: Option<u64>,
    pinned_etag: Option<String>,
    closed: bool,
}

impl FileHandle {
    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn object(&self) -> &ObjectKey {
        &self.object
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VflError {
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("is a directory: {0}")]
    IsADirectory(String),
    #[error("{0} has no backing object")]
    NoBackingObject(String),
    #[error("read offset {offset} at or past end of file (size {size})")]
    ReadPastEnd { offset: u64, size: u64 },
    #[error("handle is closed")]
    HandleClosed,
    #[error("object changed under open handle {path}: had {pinned}, store has {found}")]
    StaleObject {
        path: String,
        pinned: String,
        found: String,
    },
    #[error("bad configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, VflError>;

type BlockId = (String, String, u64);

struct CacheEntry {
    etag: String,
    bytes: Arc<Vec<u8>>,
    last_use: u64,
}

#[derive(Default)]
struct CacheInner {
    map: HashMap<BlockId, CacheEntry>,
    recency: std::collections::BTreeMap<u64, BlockId>,
    inflight: HashSet<BlockId>,
    total_bytes: u64,
    tick: u64,
    stats: CacheStats,
}

impl CacheInner {
    fn touch(&mut self, id: &BlockId) {
        let entry = self.map.get_mut(id).expect("touch of present entry");
        self.recency.remove(&entry.last_use);
        self.tick += 1;
        entry.last_use = self.tick;
        self.recency.insert(self.tick, id.clone());
    }

    fn remove(&mut self, id: &BlockId) {
        if let Some(entry) = self.map.remove(id) {
            self.recency.remove(&entry.last_use);
            self.total_bytes -= entry.bytes.len() as u64;
        }
    }

    fn insert(&mut self, id: BlockId, etag: String, bytes: Arc<Vec<u8>>) {
        self.remove(&id);
        self.tick += 1;
        self.total_bytes += bytes.len() as u64;
        self.recency.insert(self.tick, id.clone());
        self.map.insert(
            id,
            CacheEntry {
                etag,
                bytes,
                last_use: self.tick,
            },
        );
    }

    fn evict_to(&mut self, capacity: u64) {
        while self.total_bytes > capacity {
            let Some((_, id)) = self.recency.iter().next().map(|(t, id)| (*t, id.clone())) else {
                break;
            };
            self.remove(&id);
        }
    }
}

/// The mounted layer: a metadata service for the namespace plus an object
/// store for block fetches, sharing one block cache.
pub struct Vfl<S, M> {
    store: S,
    meta: M,
    config: VflConfig,
    cache: Mutex<CacheInner>,
    fill_done: Condvar,
}

impl<S: ObjectStore, M: Metastore> Vfl<S, M> {
    pub fn new(store: S, meta: M, config: VflConfig) -> Result<Self> {
        config.validate()?;
        Ok(Vfl {
            store,
            meta,
            config,
            cache: Mutex::new(CacheInner::default()),
            fill_done: Condvar::new(),
        })
    }

    pub fn config(&self) -> VflConfig {
        self.config
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn metastore(&self) -> &M {
        &self.meta
    }

    /// Resolve a path to a handle. Issues no object-store request.
    pub fn open(&self, path: &str) -> Result<FileHandle> {
        let rec = self.meta.get_meta(path)?;
        if rec.kind == FileKind::Directory {
            return Err(VflError::IsADirectory(path.to_string()));
        }
        let object = rec
            .object
            .ok_or_else(|| VflError::NoBackingObject(path.to_string()))?;
        Ok(FileHandle {
            path: path.to_string(),
            object,
            size: rec.size,
            prev_end: None,
            pinned_etag: None,
            closed: false,
        })
    }

    pub fn close(&self, handle: &mut FileHandle) {
        handle.closed = true;
    }

    /// Served entirely from the metadata service.
    pub fn stat(&self, path: &str) -> Result<FileMeta> {
        Ok(self.meta.get_meta(path)?)
    }

    /// Served entirely from the metadata service.
    pub fn readdir(&self, path: &str) -> Result<Vec<(String, FileKind)>> {
        Ok(self.meta.list_dir(path)?)
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.lock().expect("cache lock").stats
    }

    /// Bytes currently resident in the block cache.
    pub fn cached_bytes(&self) -> u64 {
        self.cache.lock().expect("cache lock").total_bytes
    }

    /// Read up to `length` bytes at `offset`, truncating at end of file.
    pub fn read_at(&self, handle: &mut FileHandle, offset: u64, length: u64) -> Result<Vec<u8>> {
        if handle.closed {
            return Err(VflError::HandleClosed);
        }
        if offset >= handle.size {
            return Err(VflError::ReadPastEnd {
                offset,
                size: handle.size,
            });
        }
        let sequential = handle.prev_end == Some(offset);
        let end = offset.saturating_add(length).min(handle.size);
        if end == offset {
            return Ok(Vec::new());
        }

        let bs = self.config.block_size;
        let first = offset / bs;
        let last = (end - 1) / bs;
        let mut out = Vec::with_capacity((end - offset) as usize);
        for index in first..=last {
            let block = self.fetch_block(handle, index, true)?;
            let block_start = index * bs;
            let from = offset.max(block_start) - block_start;
            let to = (end - block_start).min(block.len() as u64);
            out.extend_from_slice(&block[from as usize..to as usize]);
        }
        handle.prev_end = Some(end);

        if sequential && self.config.readahead_blocks > 0 {
            let last_block = (handle.size - 1) / bs;
            for ahead in 1..=self.config.readahead_blocks as u64 {
                let index = last + ahead;
                if index > last_block {
                    break;
                }
                self.prefetch_block(handle, index);
            }
        }
        Ok(out)
    }

    fn block_id(&self, key: &ObjectKey, index: u64) -> BlockId {
        (key.bucket.clone(), key.key.clone(), index)
    }

    fn block_range(&self, size: u64, index: u64) -> (u64, u64) {
        let bs = self.config.block_size;
        let start = index * bs;
        (start, bs.min(size - start))
    }

    /// Get one block, from cache or the store, maintaining the single-flight
    /// contract and the handle's pinned content version.
    fn fetch_block(&self, handle: &mut FileHandle, index: u64, demand: bool) -> Result<Arc<Vec<u8>>> {
        let id = self.block_id(&handle.object, index);
        let mut inner = self.cache.lock().expect("cache lock");
        loop {
            if let Some(entry) = inner.map.get(&id) {
                match &handle.pinned_etag {
                    Some(pinned) if *pinned != entry.etag => {
                        // The cache holds a different content version than
                        // this handle observed; refetch below to find out
                        // which of the two is current.
                        inner.remove(&id);
                    }
                    _ => {
                        let bytes = Arc::clone(&entry.bytes);
                        let etag = entry.etag.clone();
                        inner.touch(&id);
                        if demand {
                            inner.stats.hits += 1;
                        }
                        handle.pinned_etag.get_or_insert(etag);
                        return Ok(bytes);
                    }
                }
            }
            if inner.inflight.contains(&id) {
                inner = self.fill_done.wait(inner).expect("cache lock");
                continue;
            }
            inner.inflight.insert(id.clone());
            break;
        }
        drop(inner);

        let (start, len) = self.block_range(handle.size, index);
        let result = self.store.get_range_tagged(&handle.object, start, len);

        let mut inner = self.cache.lock().expect("cache lock");
        inner.inflight.remove(&id);
        self.fill_done.notify_all();
        let (bytes, etag) = result?;
        inner.stats.backend_requests += 1;
        inner.stats.backend_bytes += bytes.len() as u64;
        if demand {
            inner.stats.misses += 1;
        }
        let bytes = Arc::new(bytes);
        inner.insert(id, etag.clone(), Arc::clone(&bytes));
        inner.evict_to(self.config.cache_capacity);
        match &handle.pinned_etag {
            Some(pinned) if *pinned != etag => Err(VflError::StaleObject {
                path: handle.path.clone(),
                pinned: pinned.clone(),
                found: etag,
            }),
            _ => {
                handle.pinned_etag.get_or_insert(etag);
                Ok(bytes)
            }
        }
    }

    /// Speculative fetch; never fails the caller and skips anything cached
    /// or already being fetched.
    fn prefetch_block(&self, handle: &FileHandle, index: u64) {
        let id = self.block_id(&handle.object, index);
        {
            let mut inner = self.cache.lock().expect("cache lock");
            if inner.map.contains_key(&id) || inner.inflight.contains(&id) {
                return;
            }
            inner.inflight.insert(id.clone());
        }
        let (start, len) = self.block_range(handle.size, index);
        let result = self.store.get_range_tagged(&handle.object, start, len);
        let mut inner = self.cache.lock().expect("cache lock");
        inner.inflight.remove(&id);
        self.fill_done.notify_all();
        if let Ok((bytes, etag)) = result {
            inner.stats.backend_requests += 1;
            inner.stats.backend_bytes += bytes.len() as u64;
            inner.insert(id, etag, Arc::new(bytes));
            inner.evict_to(self.config.cache_capacity);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::MemoryMetastore;
    use crate::store::{MemoryStore, NetworkModel, SimulatedStore};
    use rand::{Rng, SeedableRng};

    const MIB: u64 = 1 << 20;

    struct Fixture {
        vfl: Vfl<Arc<SimulatedStore<MemoryStore>>, Arc<MemoryMetastore>>,
        store: Arc<SimulatedStore<MemoryStore>>,
    }

    fn fixture(files: &[(&str, Vec<u8>)], config: VflConfig) -> Fixture {
        let store = Arc::new(SimulatedStore::new(MemoryStore::new(), NetworkModel::free()));
        let meta = Arc::new(MemoryMetastore::new());
        for (path, data) in files {
            let key = ObjectKey::new("bkt", path.trim_start_matches('/')).unwrap();
            let m = store.put(&key, data).unwrap();
            meta.set_meta(&FileMeta::file(*path, key, m.size, m.mtime)).unwrap();
        }
        store.reset_clock();
        let vfl = Vfl::new(Arc::clone(&store), meta, config).unwrap();
        Fixture { vfl, store }
    }

    fn config(block_size: u64, readahead: u32, capacity: u64) -> VflConfig {
        VflConfig {
            block_size,
            readahead_blocks: readahead,
            cache_capacity: capacity,
        }
    }

    fn patterned(n: usize) -> Vec<u8> {
        (0..n).map(|i| (i % 251) as u8).collect()
    }

    #[test]
    fn config_validation() {
        assert!(VflConfig::default().validate().is_ok());
        assert!(config(3 * MIB, 0, 16 * MIB).validate().is_err());
        assert!(config(2048, 0, 16 * MIB).validate().is_err());
        assert!(config(4096, 0, 1024).validate().is_err());
    }

    #[test]
    fn open_issues_no_store_request() {
        let fx = fixture(&[("/a", patterned(100))], config(4096, 0, MIB));
        let handle = fx.vfl.open("/a").unwrap();
        assert_eq!(handle.size(), 100);
        assert_eq!(fx.store.request_count(), 0);
        assert_eq!(fx.vfl.cache_stats(), CacheStats::default());
    }

    #[test]
    fn open_errors() {
        let fx = fixture(&[("/dir/a", patterned(10))], config(4096, 0, MIB));
        assert!(matches!(fx.vfl.open("/missing"), Err(VflError::Meta(MetaError::NotFound(_)))));
        assert!(matches!(fx.vfl.open("/dir"), Err(VflError::IsADirectory(_))));
    }

    #[test]
    fn boundary_read_touches_exactly_two_blocks() {
        let data = patterned(10 * MIB as usize);
        let fx = fixture(&[("/f", data.clone())], config(4 * MIB, 0, 64 * MIB));
        let mut h = fx.vfl.open("/f").unwrap();
        let got = fx.vfl.read_at(&mut h, 4 * MIB - 4, 8).unwrap();
        assert_eq!(got, &data[(4 * MIB - 4) as usize..(4 * MIB + 4) as usize]);
        assert_eq!(fx.vfl.cache_stats().backend_requests, 2);

        // Same read again: all cached.
        let again = fx.vfl.read_at(&mut h, 4 * MIB - 4, 8).unwrap();
        assert_eq!(again, got);
        let stats = fx.vfl.cache_stats();
        assert_eq!(stats.backend_requests, 2);
        assert_eq!(stats.hits, 2);
        assert_eq!(stats.misses, 2);
    }

    #[test]
    fn sequential_read_request_count_is_block_count() {
        let size = 64 * MIB;
        let fx = fixture(&[("/big", vec![7u8; size as usize])], config(4 * MIB, 0, 128 * MIB));
        let mut h = fx.vfl.open("/big").unwrap();
        let mut offset = 0;
        while offset < size {
            let chunk = fx.vfl.read_at(&mut h, offset, 4 * MIB).unwrap();
            offset += chunk.len() as u64;
        }
        let stats = fx.vfl.cache_stats();
        assert_eq!(stats.backend_requests, 16);
        assert_eq!(stats.misses, 16);
        assert_eq!(stats.backend_bytes, 64 * MIB);

        // Whole-file reread comes from cache.
        let mut offset = 0;
        while offset < size {
            offset += fx.vfl.read_at(&mut h, offset, 4 * MIB).unwrap().len() as u64;
        }
        assert_eq!(fx.vfl.cache_stats().backend_requests, 16);
    }

    #[test]
    fn cold_read_accounting() {
        let fx = fixture(&[("/f", patterned(8 * MIB as usize))], config(4 * MIB, 0, 64 * MIB));
        let mut h = fx.vfl.open("/f").unwrap();
        fx.vfl.read_at(&mut h, 0, 4 * MIB).unwrap();
        let stats = fx.vfl.cache_stats();
        assert_eq!(stats.misses, 1);
        assert_eq!(stats.hits, 0);
        assert_eq!(stats.backend_bytes, 4 * MIB);
    }

    #[test]
    fn readahead_prefetches_on_sequential_access() {
        let fx = fixture(&[("/f", patterned(16 * MIB as usize))], config(4 * MIB, 1, 64 * MIB));
        let mut h = fx.vfl.open("/f").unwrap();
        // First read: not sequential, demand only.
        fx.vfl.read_at(&mut h, 0, MIB).unwrap();
        assert_eq!(fx.vfl.cache_stats().backend_requests, 1);
        // Second read continues at the previous end: block 0 is cached and
        // block 1 gets prefetched.
        fx.vfl.read_at(&mut h, MIB, MIB).unwrap();
        let stats = fx.vfl.cache_stats();
        assert_eq!(stats.backend_requests, 2);
        assert_eq!(stats.misses, 1);
        // Continue into the prefetched block: hits only, block 2 prefetched.
        fx.vfl.read_at(&mut h, 2 * MIB, 2 * MIB).unwrap();
        fx.vfl.read_at(&mut h, 4 * MIB, MIB).unwrap();
        let stats = fx.vfl.cache_stats();
        assert_eq!(stats.backend_requests, 3);
        assert_eq!(stats.misses, 1);
        assert_eq!(stats.hits, 3);
    }

    #[test]
    fn stat_and_readdir_touch_no_objects() {
        let fx = fixture(&[("/d/a", patterned(10)), ("/d/b", patterned(20))], config(4096, 0, MIB));
        for _ in 0..1000 {
            fx.vfl.stat("/d/a").unwrap();
        }
        assert_eq!(fx.vfl.readdir("/d").unwrap().len(), 2);
        assert_eq!(fx.store.request_count(), 0);
        assert_eq!(fx.vfl.cache_stats().backend_requests, 0);
    }

    #[test]
    fn read_errors() {
        let fx = fixture(&[("/f", patterned(100))], config(4096, 0, MIB));
        let mut h = fx.vfl.open("/f").unwrap();
        assert!(matches!(
            fx.vfl.read_at(&mut h, 100, 1),
            Err(VflError::ReadPastEnd { offset: 100, size: 100 })
        ));
        fx.vfl.close(&mut h);
        assert!(matches!(fx.vfl.read_at(&mut h, 0, 1), Err(VflError::HandleClosed)));
    }

    #[test]
    fn truncation_at_end_of_file() {
        let data = patterned(5000);
        let fx = fixture(&[("/f", data.clone())], config(4096, 0, MIB));
        let mut h = fx.vfl.open("/f").unwrap();
        assert_eq!(fx.vfl.read_at(&mut h, 4990, 100).unwrap(), &data[4990..]);
    }

    #[test]
    fn eviction_keeps_reads_exact_and_capacity_bounded() {
        let data = patterned(64 * 4096);
        // Cache holds only 4 blocks.
        let fx = fixture(&[("/f", data.clone())], config(4096, 0, 4 * 4096));
        let mut h = fx.vfl.open("/f").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let offset = rng.gen_range(0..data.len() as u64 - 1);
            let length = rng.gen_range(1..16 * 1024u64);
            let got = fx.vfl.read_at(&mut h, offset, length).unwrap();
            let end = (offset + length).min(data.len() as u64);
            assert_eq!(got, &data[offset as usize..end as usize]);
            assert!(fx.vfl.cached_bytes() <= 4 * 4096);
        }
    }

    #[test]
    fn overwrite_mid_read_is_detected() {
        let data = patterned(8 * 4096);
        let fx = fixture(&[("/f", data.clone())], config(4096, 0, MIB));
        let mut h = fx.vfl.open("/f").unwrap();
        fx.vfl.read_at(&mut h, 0, 10).unwrap();

        // Replace the object behind the handle's back.
        let key = ObjectKey::new("bkt", "f").unwrap();
        fx.store.put(&key, &vec![0u8; 8 * 4096]).unwrap();

        // The next uncached block comes back with a different etag.
        assert!(matches!(
            fx.vfl.read_at(&mut h, 4096, 10),
            Err(VflError::StaleObject { .. })
        ));

        // A fresh handle sees the new content fine.
        let mut h2 = fx.vfl.open("/f").unwrap();
        assert_eq!(fx.vfl.read_at(&mut h2, 4096, 10).unwrap(), vec![0u8; 10]);
    }

    #[test]
    fn concurrent_cold_reads_fetch_once() {
        let data = Arc::new(patterned(4096));
        let fx = Arc::new(fixture(&[("/f", data.to_vec())], config(4096, 0, MIB)));
        let mut threads = Vec::new();
        for _ in 0..8 {
            let fx = Arc::clone(&fx);
            let data = Arc::clone(&data);
            threads.push(std::thread::spawn(move || {
                let mut h = fx.vfl.open("/f").unwrap();
                let got = fx.vfl.read_at(&mut h, 0, 4096).unwrap();
                assert_eq!(got, *data);
            }));
        }
        for t in threads {
            t.join().unwrap();
        }
        assert_eq!(fx.vfl.cache_stats().backend_requests, 1);
        let stats = fx.vfl.cache_stats();
        assert_eq!(stats.hits + stats.misses, 8);
        assert_eq!(stats.misses, 1);
    }

    /// Every backend request must be block-aligned and full-length except
    /// the object's final block.
    #[test]
    fn requests_are_aligned() {
        struct Recorder {
            inner: MemoryStore,
            ranges: Mutex<Vec<(u64, u64)>>,
        }
        impl ObjectStore for Recorder {
            fn put(&self, key: &ObjectKey, data: &[u8]) -> crate::store::Result<crate::store::ObjectMeta> {
                self.inner.put(key, data)
            }
            fn get_range(&self, key: &ObjectKey, offset: u64, length: u64) -> crate::store::Result<Vec<u8>> {
                self.ranges.lock().unwrap().push((offset, length));
                self.inner.get_range(key, offset, length)
            }
            fn get_range_tagged(
                &self,
                key: &ObjectKey,
                offset: u64,
                length: u64,
            ) -> crate::store::Result<(Vec<u8>, String)> {
                self.ranges.lock().unwrap().push((offset, length));
                self.inner.get_range_tagged(key, offset, length)
            }
            fn list(&self, bucket: &str, prefix: &str) -> crate::store::Result<Vec<ObjectKey>> {
                self.inner.list(bucket, prefix)
            }
            fn head(&self, key: &ObjectKey) -> crate::store::Result<crate::store::ObjectMeta> {
                self.inner.head(key)
            }
        }

        let size = 3 * 4096 + 1000;
        let data = patterned(size);
        let recorder = Arc::new(Recorder {
            inner: MemoryStore::new(),
            ranges: Mutex::new(Vec::new()),
        });
        let key = ObjectKey::new("b", "f").unwrap();
        let m = recorder.put(&key, &data).unwrap();
        let meta = MemoryMetastore::new();
        meta.set_meta(&FileMeta::file("/f", key, m.size, m.mtime)).unwrap();
        let vfl = Vfl::new(Arc::clone(&recorder), Arc::new(meta), config(4096, 1, MIB)).unwrap();

        let mut h = vfl.open("/f").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut offset = 0;
        // A mix of sequential (triggering readahead) and random reads.
        for step in 0..200 {
            if offset >= size as u64 {
                offset = 0;
            }
            let got = vfl.read_at(&mut h, offset, 700).unwrap();
            let end = (offset + 700).min(size as u64);
            assert_eq!(got, &data[offset as usize..end as usize]);
            offset = if step % 3 == 0 { rng.gen_range(0..size as u64) } else { end };
        }
        for (off, len) in recorder.ranges.lock().unwrap().iter() {
            assert_eq!(off % 4096, 0, "unaligned offset {off}");
            if off + len < size as u64 {
                assert_eq!(*len, 4096, "short non-final request at {off}");
            } else {
                assert_eq!(off + len, size as u64, "final block length");
            }
        }
    }

    /// A read touching k blocks issues at most k + readahead_blocks
    /// backend requests, whatever the cache state.
    #[test]
    fn per_read_request_bound() {
        let data = patterned(40 * 4096);
        for readahead in [0u32, 1, 3] {
            let fx = fixture(&[("/f", data.clone())], config(4096, readahead, 8 * 4096));
            let mut h = fx.vfl.open("/f").unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(readahead as u64);
            let mut before = 0;
            for _ in 0..300 {
                let offset = rng.gen_range(0..data.len() as u64);
                let length = rng.gen_range(1..5 * 4096u64);
                let end = (offset + length).min(data.len() as u64);
                fx.vfl.read_at(&mut h, offset, length).unwrap();
                let touched = (end - 1) / 4096 - offset / 4096 + 1;
                let after = fx.vfl.cache_stats().backend_requests;
                assert!(
                    after - before <= touched + readahead as u64,
                    "read issued {} requests for {touched} blocks (readahead {readahead})",
                    after - before
                );
                before = after;
            }
        }
    }

    /// Random reads through the layer must equal direct object slices.
    #[test]
    fn random_reads_match_direct_slices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let size = 300_000;
        let data: Vec<u8> = (0..size).map(|_| rng.gen()).collect();
        let fx = fixture(&[("/obj", data.clone())], config(16 * 1024, 2, 128 * 1024));
        let mut h = fx.vfl.open("/obj").unwrap();
        for _ in 0..2000 {
            let offset = rng.gen_range(0..size as u64);
            let length = rng.gen_range(0..40_000u64);
            let got = fx.vfl.read_at(&mut h, offset, length).unwrap();
            let end = (offset + length).min(size as u64);
            assert_eq!(got, &data[offset as usize..end as usize], "offset {offset} length {length}");
        }
    }
}
