//! Shared in-memory key/value substrate.
//!
//! Both the metadata service and the task queue keep their state in one of
//! these maps: string keys, string values, a compare-and-swap primitive for
//! atomic state transitions, and sorted prefix scans. One mutex over the
//! whole map makes every operation linearizable, which is plenty at the
//! request rates involved.

use std::collections::BTreeMap;
use std::sync::Mutex;

#[derive(Default)]
pub struct KvMap {
    map: Mutex<BTreeMap<String, String>>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.map.lock().expect("kv lock").get(key).cloned()
    }

    /// Set unconditionally, returning the previous value.
    pub fn set(&self, key: &str, value: &str) -> Option<String> {
        self.map
            .lock()
            .expect("kv lock")
            .insert(key.to_string(), value.to_string())
    }

    /// Insert only if the key is absent; returns false if it already exists.
    pub fn set_if_absent(&self, key: &str, value: &str) -> bool {
        let mut map = self.map.lock().expect("kv lock");
        if map.contains_key(key) {
            return false;
        }
        map.insert(key.to_string(), value.to_string());
        true
    }

    /// Atomically replace `key`'s value with `new` iff it currently equals
    /// `expect`. Returns true on success.
    pub fn compare_and_swap(&self, key: &str, expect: &str, new: &str) -> bool {
        let mut map = self.map.lock().expect("kv lock");
        match map.get(key) {
            Some(current) if current == expect => {
                map.insert(key.to_string(), new.to_string());
                true
            }
            _ => false,
        }
    }

    pub fn remove(&self, key: &str) -> Option<String> {
        self.map.lock().expect("kv lock").remove(key)
    }

    /// All `(key, value)` pairs whose key starts with `prefix`, in key order.
    pub fn scan_prefix(&self, prefix: &str) -> Vec<(String, String)> {
        self.map
            .lock()
            .expect("kv lock")
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("kv lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
