//! Simulated-network wrapper charging virtual time per request.

use std::sync::Mutex;

use super::{ObjectKey, ObjectMeta, ObjectStore, Result, StoreError};

/// Analytic cost model for one storage request.
///
/// A request transferring `b` bytes costs
/// `per_request_overhead_s + latency_s + b / bandwidth_Bps` seconds of
/// virtual time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetworkModel {
    /// Round-trip latency per request, seconds.
    pub latency_s: f64,
    /// Transfer bandwidth, bytes per second.
    pub bandwidth_bps: f64,
    /// Fixed software overhead per request, seconds.
    pub per_request_overhead_s: f64,
}

impl NetworkModel {
    pub fn new(latency_s: f64, bandwidth_bps: f64, per_request_overhead_s: f64) -> Result<Self> {
        if !(latency_s >= 0.0 && per_request_overhead_s >= 0.0 && bandwidth_bps > 0.0) {
            return Err(StoreError::Backend(format!(
                "invalid network model: latency {latency_s}, bandwidth {bandwidth_bps}, overhead {per_request_overhead_s}"
            )));
        }
        Ok(NetworkModel {
            latency_s,
            bandwidth_bps,
            per_request_overhead_s,
        })
    }

    /// Virtual seconds one request transferring `bytes` takes.
    pub fn request_seconds(&self, bytes: u64) -> f64 {
        self.per_request_overhead_s + self.latency_s + bytes as f64 / self.bandwidth_bps
    }

    /// A model with no cost at all; useful as a pure request counter.
    pub fn free() -> Self {
        NetworkModel {
            latency_s: 0.0,
            bandwidth_bps: f64::INFINITY,
            per_request_overhead_s: 0.0,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct SimState {
    virtual_seconds: f64,
    requests: u64,
    bytes: u64,
}

/// Wraps a store and accounts every request against a [`NetworkModel`].
///
/// The wrapper never alters the bytes returned by the inner store; it only
/// advances a virtual clock and counts traffic. All modeled benchmark
/// numbers come from this clock, never from wall time.
pub struct SimulatedStore<S> {
    inner: S,
    model: NetworkModel,
    state: Mutex<SimState>,
}

impl<S: ObjectStore> SimulatedStore<S> {
    pub fn new(inner: S, model: NetworkModel) -> Self {
        SimulatedStore {
            inner,
            model,
            state: Mutex::new(SimState::default()),
        }
    }

    pub fn model(&self) -> NetworkModel {
        self.model
    }

    /// Virtual seconds accumulated since construction (or the last reset).
    pub fn virtual_seconds(&self) -> f64 {
        self.state.lock().expect("sim lock").virtual_seconds
    }

    /// Requests charged so far.
    pub fn request_count(&self) -> u64 {
        self.state.lock().expect("sim lock").requests
    }

    /// Payload bytes charged so far (both directions).
    pub fn transferred_bytes(&self) -> u64 {
        self.state.lock().expect("sim lock").bytes
    }

    pub fn reset_clock(&self) {
        *self.state.lock().expect("sim lock") = SimState::default();
    }

    pub fn into_inner(self) -> S {
        self.inner
    }

    fn charge(&self, payload_bytes: u64) {
        let mut state = self.state.lock().expect("sim lock");
        state.virtual_seconds += self.model.request_seconds(payload_bytes);
        state.requests += 1;
        state.bytes += payload_bytes;
    }
}

impl<S: ObjectStore> ObjectStore for SimulatedStore<S> {
    fn put(&self, key: &ObjectKey, data: &[u8]) -> Result<ObjectMeta> {
        let meta = self.inner.put(key, data)?;
        self.charge(data.len() as u64);
        Ok(meta)
    }

    fn get_range(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<Vec<u8>> {
        let bytes = self.inner.get_range(key, offset, length)?;
        self.charge(bytes.len() as u64);
        Ok(bytes)
    }

    fn get_range_tagged(&self, key: &ObjectKey, offset: u64, length: u64) -> Result<(Vec<u8>, String)> {
        let (bytes, etag) = self.inner.get_range_tagged(key, offset, length)?;
        self.charge(bytes.len() as u64);
        Ok((bytes, etag))
    }

    fn list(&self, bucket: &str, prefix: &str) -> Result<Vec<ObjectKey>> {
        let keys = self.inner.list(bucket, prefix)?;
        self.charge(0);
        Ok(keys)
    }

    fn head(&self, key: &ObjectKey) -> Result<ObjectMeta> {
        let meta = self.inner.head(key)?;
        self.charge(0);
        Ok(meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::MemoryStore;

    #[test]
    fn charges_exactly_per_request() {
        let model = NetworkModel::new(40e-6, 1e9, 10e-6).unwrap();
        let store = SimulatedStore::new(MemoryStore::new(), model);
        let k = ObjectKey::new("b", "obj").unwrap();

        store.put(&k, &[7u8; 1000]).unwrap();
        let after_put = 10e-6 + 40e-6 + 1000.0 / 1e9;
        assert!((store.virtual_seconds() - after_put).abs() < 1e-15);

        let bytes = store.get_range(&k, 0, 500).unwrap();
        assert_eq!(bytes, vec![7u8; 500]);
        let expected = after_put + 10e-6 + 40e-6 + 500.0 / 1e9;
        assert!((store.virtual_seconds() - expected).abs() < 1e-15);
        assert_eq!(store.request_count(), 2);
        assert_eq!(store.transferred_bytes(), 1500);
    }

    #[test]
    fn truncated_read_charges_returned_bytes_only() {
        let store = SimulatedStore::new(MemoryStore::new(), NetworkModel::new(0.0, 100.0, 0.0).unwrap());
        let k = ObjectKey::new("b", "obj").unwrap();
        store.put(&k, &[1u8; 10]).unwrap();
        store.get_range(&k, 8, 100).unwrap(); // only 2 bytes exist
        assert!((store.virtual_seconds() - (10.0 / 100.0 + 2.0 / 100.0)).abs() < 1e-12);
    }

    #[test]
    fn wrapper_is_transparent() {
        let store = SimulatedStore::new(MemoryStore::new(), NetworkModel::free());
        let k = ObjectKey::new("b", "x").unwrap();
        store.put(&k, b"payload").unwrap();
        assert_eq!(store.get(&k).unwrap(), b"payload");
        assert_eq!(store.virtual_seconds(), 0.0);
        assert_eq!(store.request_count(), 3); // put + head + get_range
    }

    #[test]
    fn rejects_bad_models() {
        assert!(NetworkModel::new(-1.0, 1.0, 0.0).is_err());
        assert!(NetworkModel::new(0.0, 0.0, 0.0).is_err());
    }
}
