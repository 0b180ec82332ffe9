//! Path-addressed file metadata service.
//!
//! The object store never serves stat/readdir traffic; this module does.
//! Records live in a [`KvMap`] keyed by normalized path.
//! Ancestor directories are implied: storing `/a/b/c` makes `/a` and `/a/b`
//! resolve as directories without materializing records for them.
//!
//! The same service is available embedded in-process ([`MemoryMetastore`])
//! or over a line protocol ([`server::MetaServer`] / [`client::RemoteMetastore`]);
//! the two are observationally equivalent.

pub mod client;
pub mod server;
pub mod wire;

use std::sync::Arc;

use crate::kv::KvMap;
use crate::store::{ObjectKey, ObjectStore, StoreError};

const META_PREFIX: &str = "meta:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    File,
    Directory,
}

impl FileKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FileKind::File => "file",
            FileKind::Directory => "directory",
        }
    }

    pub fn parse(s: &str) -> Option<FileKind> {
        match s {
            "file" => Some(FileKind::File),
            "directory" => Some(FileKind::Directory),
            _ => None,
        }
    }
}

/// One metadata record: a file backed by an object, or a directory.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FileMeta {
    /// Normalized absolute path.
    pub path: String,
    pub kind: FileKind,
    /// Backing object; files only.
    pub object: Option<ObjectKey>,
    pub size: u64,
    pub mtime: i64,
}

impl FileMeta {
    pub fn file(path: impl Into<String>, object: ObjectKey, size: u64, mtime: i64) -> Self {
        FileMeta {
            path: path.into(),
            kind: FileKind::File,
            object: Some(object),
            size,
            mtime,
        }
    }

    pub fn directory(path: impl Into<String>) -> Self {
        FileMeta {
            path: path.into(),
            kind: FileKind::Directory,
            object: None,
            size: 0,
            mtime: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetaError {
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("not a directory: {0}")]
    NotADirectory(String),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("connection: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type Result<T> = std::result::Result<T, MetaError>;

/// Validate a normalized absolute path: leading separator, single
/// separators, no `.`/`..` segments, no trailing separator except `/`.
pub fn validate_path(path: &str) -> Result<()> {
    if path == "/" {
        return Ok(());
    }
    if !path.starts_with('/') {
        return Err(MetaError::MalformedPath(format!(
            "{path:?}: missing leading separator"
        )));
    }
    if path.ends_with('/') {
        return Err(MetaError::MalformedPath(format!(
            "{path:?}: trailing separator"
        )));
    }
    for segment in path[1..].split('/') {
        if segment.is_empty() {
            return Err(MetaError::MalformedPath(format!(
                "{path:?}: doubled separator"
            )));
        }
        if segment == "." || segment == ".." {
            return Err(MetaError::MalformedPath(format!(
                "{path:?}: relative segment"
            )));
        }
    }
    Ok(())
}

/// Metadata operations shared by the embedded store and the wire client.
pub trait Metastore: Send + Sync {
    fn set_meta(&self, rec: &FileMeta) -> Result<()>;
    fn get_meta(&self, path: &str) -> Result<FileMeta>;
    /// Immediate children of a directory: `(name, kind)` sorted by name.
    fn list_dir(&self, path: &str) -> Result<Vec<(String, FileKind)>>;
}

impl<M: Metastore + ?Sized> Metastore for Arc<M> {
    fn set_meta(&self, rec: &FileMeta) -> Result<()> {
        (**self).set_meta(rec)
    }
    fn get_meta(&self, path: &str) -> Result<FileMeta> {
        (**self).get_meta(path)
    }
    fn list_dir(&self, path: &str) -> Result<Vec<(String, FileKind)>> {
        (**self).list_dir(path)
    }
}

/// The in-memory metadata service.
#[derive(Default)]
pub struct MemoryMetastore {
    kv: KvMap,
}

impl MemoryMetastore {
    pub fn new() -> Self {
        Self::default()
    }

    fn kv_key(path: &str) -> String {
        format!("{META_PREFIX}{path}")
    }

    /// Prefix under which all descendants of `path` are stored.
    fn descendant_prefix(path: &str) -> String {
        if path == "/" {
            format!("{META_PREFIX}/")
        } else {
            format!("{META_PREFIX}{path}/")
        }
    }

    fn has_descendants(&self, path: &str) -> bool {
        !self.kv.scan_prefix(&Self::descendant_prefix(path)).is_empty()
    }
}

impl Metastore for MemoryMetastore {
    fn set_meta(&self, rec: &FileMeta) -> Result<()> {
        validate_path(&rec.path)?;
        if rec.path == "/" {
            return Err(MetaError::MalformedPath(
                "cannot set a record on the root".into(),
            ));
        }
        if rec.kind == FileKind::Directory && rec.object.is_some() {
            return Err(MetaError::MalformedRecord(format!(
                "{}: directory with backing object",
                rec.path
            )));
        }
        self.kv.set(&Self::kv_key(&rec.path), &wire::encode_record(rec));
        Ok(())
    }

    fn get_meta(&self, path: &str) -> Result<FileMeta> {
        validate_path(path)?;
        if let Some(raw) = self.kv.get(&Self::kv_key(path)) {
            return wire::decode_record(path, &raw);
        }
        // The root and any proper ancestor of a stored path are directories.
        if path == "/" || self.has_descendants(path) {
            return Ok(FileMeta::directory(path));
        }
        Err(MetaError::NotFound(path.to_string()))
    }

    fn list_dir(&self, path: &str) -> Result<Vec<(String, FileKind)>> {
        let meta = self.get_meta(path)?;
        if meta.kind != FileKind::Directory {
            return Err(MetaError::NotADirectory(path.to_string()));
        }
        let prefix = Self::descendant_prefix(path);
        let mut children: std::collections::BTreeMap<String, FileKind> =
            std::collections::BTreeMap::new();
        for (kv_key, raw) in self.kv.scan_prefix(&prefix) {
            let rest = &kv_key[prefix.len()..];
            match rest.split_once('/') {
                // Deeper descendant: the first component is a directory here.
                Some((name, _)) => {
                    children.entry(name.to_string()).or_insert(FileKind::Directory);
                }
                None => {
                    let rec = wire::decode_record(rest, &raw)?;
                    children.insert(rest.to_string(), rec.kind);
                }
            }
        }
        Ok(children.into_iter().collect())
    }
}

/// Convert an object listing into file records mounted under `mount`.
///
/// Key separators become directory levels: bucket `b`, key `a/c.dat`,
/// mount `/data` yields a file at `/data/a/c.dat`. Sizes and mtimes come
/// from a `head` per object. Returns the paths written.
pub fn import_objects<S: ObjectStore + ?Sized, M: Metastore + ?Sized>(
    store: &S,
    meta: &M,
    bucket: &str,
    prefix: &str,
    mount: &str,
) -> Result<Vec<String>> {
    validate_path(mount)?;
    let base = if mount == "/" { String::new() } else { mount.to_string() };
    let mut written = Vec::new();
    for key in store.list(bucket, prefix)? {
        let object_meta = store.head(&key)?;
        let path = format!("{base}/{}", key.key);
        let rec = FileMeta::file(&path, key, object_meta.size, object_meta.mtime);
        meta.set_meta(&rec)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::MemoryStore;

    fn file_rec(path: &str, size: u64) -> FileMeta {
        FileMeta::file(
            path,
            ObjectKey::new("b", path.trim_start_matches('/')).unwrap(),
            size,
            1000,
        )
    }

    #[test]
    fn path_validation() {
        assert!(validate_path("/").is_ok());
        assert!(validate_path("/a/b").is_ok());
        assert!(validate_path("a/b").is_err());
        assert!(validate_path("/a//b").is_err());
        assert!(validate_path("/a/../b").is_err());
        assert!(validate_path("/a/./b").is_err());
        assert!(validate_path("/a/").is_err());
    }

    #[test]
    fn set_get_roundtrip_and_last_write_wins() {
        let meta = MemoryMetastore::new();
        let rec = file_rec("/a/b/c", 10);
        meta.set_meta(&rec).unwrap();
        assert_eq!(meta.get_meta("/a/b/c").unwrap(), rec);

        let rec2 = file_rec("/a/b/c", 99);
        meta.set_meta(&rec2).unwrap();
        assert_eq!(meta.get_meta("/a/b/c").unwrap().size, 99);
    }

    #[test]
    fn malformed_paths_are_rejected() {
        let meta = MemoryMetastore::new();
        let mut rec = file_rec("/ok", 1);
        rec.path = "a/../b".into();
        assert!(matches!(
            meta.set_meta(&rec),
            Err(MetaError::MalformedPath(_))
        ));
        assert!(matches!(
            meta.get_meta("no-slash"),
            Err(MetaError::MalformedPath(_))
        ));
    }

    #[test]
    fn ancestors_are_implied_directories() {
        let meta = MemoryMetastore::new();
        meta.set_meta(&file_rec("/a/b/c", 1)).unwrap();

        let a = meta.get_meta("/a").unwrap();
        assert_eq!(a.kind, FileKind::Directory);
        assert_eq!(meta.get_meta("/a/b").unwrap().kind, FileKind::Directory);
        assert_eq!(
            meta.list_dir("/a").unwrap(),
            vec![("b".to_string(), FileKind::Directory)]
        );
    }

    #[test]
    fn list_dir_names_immediate_children_sorted() {
        let meta = MemoryMetastore::new();
        meta.set_meta(&file_rec("/a/x", 1)).unwrap();
        meta.set_meta(&file_rec("/a/y/z", 1)).unwrap();
        assert_eq!(
            meta.list_dir("/a").unwrap(),
            vec![
                ("x".to_string(), FileKind::File),
                ("y".to_string(), FileKind::Directory),
            ]
        );
        // Names sort by name, not by raw path bytes.
        meta.set_meta(&file_rec("/a/y!odd", 1)).unwrap();
        let names: Vec<String> = meta.list_dir("/a").unwrap().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["x", "y", "y!odd"]);
    }

    #[test]
    fn list_dir_errors() {
        let meta = MemoryMetastore::new();
        meta.set_meta(&file_rec("/a/file", 1)).unwrap();
        assert!(matches!(
            meta.list_dir("/a/file"),
            Err(MetaError::NotADirectory(_))
        ));
        assert!(matches!(meta.list_dir("/nope"), Err(MetaError::NotFound(_))));
        assert!(meta.list_dir("/").unwrap().len() == 1);
    }

    #[test]
    fn empty_root_lists_empty() {
        let meta = MemoryMetastore::new();
        assert!(meta.list_dir("/").unwrap().is_empty());
        assert_eq!(meta.get_meta("/").unwrap().kind, FileKind::Directory);
    }

    #[test]
    fn import_maps_keys_to_paths() {
        let store = MemoryStore::new();
        let meta = MemoryMetastore::new();
        for key in ["scenes/s1.rawg", "scenes/s2.rawg", "other"] {
            store
                .put(&ObjectKey::new("landsat", key).unwrap(), b"data")
                .unwrap();
        }
        let written = import_objects(&store, &meta, "landsat", "scenes/", "/in").unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(meta.get_meta("/in/scenes/s1.rawg").unwrap().size, 4);
        assert_eq!(
            meta.list_dir("/in/scenes").unwrap(),
            vec![
                ("s1.rawg".to_string(), FileKind::File),
                ("s2.rawg".to_string(), FileKind::File),
            ]
        );
    }

    /// list_dir must agree with a brute-force recomputation from the set of
    /// stored paths.
    #[test]
    fn list_dir_matches_bruteforce() {
        let meta = MemoryMetastore::new();
        let paths = [
            "/t/a/1", "/t/a/2", "/t/b", "/t/c/d/e", "/t/c/f", "/other/x",
        ];
        for p in paths {
            meta.set_meta(&file_rec(p, 1)).unwrap();
        }
        for dir in ["/t", "/t/a", "/t/c", "/"] {
            let got: Vec<String> = meta.list_dir(dir).unwrap().into_iter().map(|(n, _)| n).collect();
            // Brute force: distinct first components of stored paths under dir.
            let prefix = if dir == "/" { "/".to_string() } else { format!("{dir}/") };
            let mut expect: Vec<String> = paths
                .iter()
                .filter(|p| p.starts_with(&prefix))
                .map(|p| p[prefix.len()..].split('/').next().unwrap().to_string())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            expect.sort();
            assert_eq!(got, expect, "dir {dir}");
        }
    }
}
