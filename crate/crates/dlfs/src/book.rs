//! The guide chapters from `book/`, included as rustdoc so every code
//! snippet in the book runs under `cargo test --doc`. mdbook cannot run
//! snippets against this crate itself, so the book and the doc tests
//! share one source of truth: the markdown.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/object-store.md")]
pub mod object_store {}

#[doc = include_str!("../../../book/src/metadata.md")]
pub mod metadata {}

#[doc = include_str!("../../../book/src/virtual-file-layer.md")]
pub mod virtual_file_layer {}

#[doc = include_str!("../../../book/src/tiling.md")]
pub mod tiling {}

#[doc = include_str!("../../../book/src/rasters.md")]
pub mod rasters {}

#[doc = include_str!("../../../book/src/ingest.md")]
pub mod ingest {}

#[doc = include_str!("../../../book/src/segmentation.md")]
pub mod segmentation {}

#[doc = include_str!("../../../book/src/compositing.md")]
pub mod compositing {}

#[doc = include_str!("../../../book/src/task-queue.md")]
pub mod task_queue {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
