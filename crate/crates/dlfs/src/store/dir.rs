//! Local-directory object store backend.
//!
//! Layout: `<root>/<esc(bucket)>/<esc(seg)>/.../<esc(last)>.obj`. Key
//! segments map to directory levels and the final segment gets an `.obj`
//! suffix so a key can never collide with the directory of a longer key
//! sharing its prefix. Content files are byte-exact copies of the object
//! content. Escaping percent-encodes anything outside `[A-Za-z0-9._-]`
//! (plus a leading dot) so every segment round-trips losslessly.

use std::fs;
use std::path::{Path, PathBuf};

use super::{content_etag, range_slice, ObjectKey, ObjectMeta, ObjectStore, Result, StoreError};

const OBJ_SUFFIX: &str = ".obj";

pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    /// Open (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(DirStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, key: &ObjectKey) -> PathBuf {
        let mut path = self.root.join(escape_segment(&key.bucket));
        let segments: Vec<&str> = key.key.split('/').collect();
        for seg in &segments[..segments.len() - 1] {
            path.push(escape_segment(seg));
        }
        path.push(format!(
            "{}{}",
            escape_segment(segments[segments.len() - 1]),
            OBJ_SUFFIX
        ));
        path
    }

    fn read_full(&self, key: &ObjectKey) -> Result<Vec<u8>> {
        match fs::read(self.object_path(key)) {
            Ok(data) => Ok(data),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(key.clone()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl ObjectStore for DirStore {
    fn put(&self, key: &ObjectKey, data: &[u8]) -> Result<ObjectMeta> {
        let path = self.object_path(key);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        // Write-then-rename so concurrent readers see old or new content,
        // never a truncated file. The temp name must be unique per call or
        // two writers to the same key would clobber each other's staging.
        static TMP_SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
        let seq = TMP_SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp{}-{seq}", std::process::id()));
        fs::write(&tmp, data)?;
        fs::rename(&tmp, &path)?;
        let mtime = file_mtime(&path)?;
        Ok(ObjectMeta {
            size: data.len() as u64,
            etag: content_etag(data),
            mtime,
        })
    }

    fn get_range(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<Vec<u8>> {
        let data = self.read_full(key)?;
        Ok(range_slice(&data, offset, length)?.to_vec())
    }

    fn get_range_tagged(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<(Vec<u8>, String)> {
        let data = self.read_full(key)?;
        let bytes = range_slice(&data, offset, length)?.to_vec();
        Ok((bytes, content_etag(&data)))
    }

    fn list(&self, bucket: &str, prefix: &str) -> Result<Vec<ObjectKey>> {
        let bucket_dir = self.root.join(escape_segment(bucket));
        if !bucket_dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut keys = Vec::new();
        walk(&bucket_dir, &mut Vec::new(), &mut keys)?;
        keys.retain(|k| k.starts_with(prefix));
        keys.sort();
        keys.dedup();
        Ok(keys
            .into_iter()
            .map(|key| ObjectKey {
                bucket: bucket.to_string(),
                key,
            })
            .collect())
    }

    fn head(&self, key: &ObjectKey) -> Result<ObjectMeta> {
        let data = self.read_full(key)?;
        let mtime = file_mtime(&self.object_path(key))?;
        Ok(ObjectMeta {
            size: data.len() as u64,
            etag: content_etag(&data),
            mtime,
        })
    }
}

fn walk(dir: &Path, segments: &mut Vec<String>, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_dir() {
            segments.push(unescape_segment(&name)?);
            walk(&entry.path(), segments, out)?;
            segments.pop();
        } else if let Some(stem) = name.strip_suffix(OBJ_SUFFIX) {
            let mut key = segments.join("/");
            if !key.is_empty() {
                key.push('/');
            }
            key.push_str(&unescape_segment(stem)?);
            out.push(key);
        }
        // Anything else (stray tmp files) is ignored.
    }
    Ok(())
}

fn file_mtime(path: &Path) -> Result<i64> {
    let mtime = fs::metadata(path)?
        .modified()?
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    Ok(mtime)
}

fn is_plain(byte: u8, first: bool) -> bool {
    match byte {
        b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-' => true,
        b'.' => !first, // a leading dot would produce hidden/relative names
        _ => false,
    }
}

fn escape_segment(segment: &str) -> String {
    let mut out = String::with_capacity(segment.len());
    for (i, &byte) in segment.as_bytes().iter().enumerate() {
        if is_plain(byte, i == 0) {
            out.push(byte as char);
        } else {
            out.push_str(&format!("%{byte:02X}"));
        }
    }
    out
}

fn unescape_segment(escaped: &str) -> Result<String> {
    let bytes = escaped.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = escaped
                .get(i + 1..i + 3)
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| StoreError::Backend(format!("corrupt escaped name {escaped:?}")))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| StoreError::Backend(format!("non-UTF8 name {escaped:?}")))
}
