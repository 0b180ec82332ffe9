//! dlfs: a virtual file layer over object storage, with the toolkit that
//! grows around one — an external metadata service, UTM map tiling, raster
//! ingest and analytics, a task queue, and an I/O benchmark harness.
//!
//! The crate is organized around a simple premise: blobs live in an object
//! store and are read in large aligned blocks; everything that looks like a
//! filesystem (stat, readdir, open, read-at) is answered by a separate
//! metadata service plus a shared block cache. See the guide under `book/`
//! for a chapter per subsystem.

pub mod analytics;
pub mod bench;
pub mod book;
pub mod cli;
pub mod fnv;
pub mod ingest;
pub mod kv;
pub mod meta;
pub mod queue;
pub mod raster;
pub mod store;
pub mod tiling;
pub mod vfl;

pub use meta::{FileKind, FileMeta, MemoryMetastore, MetaError, Metastore};
pub use queue::{Outcome, Task, TaskBroker, TaskQueue, TaskState};
pub use store::{
    DirStore, MemoryStore, NetworkModel, ObjectKey, ObjectMeta, ObjectStore, SimulatedStore,
    StoreError,
};
pub use vfl::{CacheStats, FileHandle, Vfl, VflConfig, VflError};
