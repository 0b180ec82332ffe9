//! I/O benchmark harness: analytic network model, block-size sweep,
//! multi-client scaling, and the cache-reuse comparison.
//!
//! Modeled numbers come from a virtual clock (deterministic, hardware
//! independent); wall-clock mode exists for curiosity and is informative
//! only. A single random read of one block per (file, offset) pair keeps
//! the sweep cold: every read costs exactly one backend request, so the
//! measured throughput lines up with the analytic model.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::meta::{FileMeta, MemoryMetastore, MetaError, Metastore};
use crate::store::{MemoryStore, NetworkModel, ObjectKey, ObjectStore, SimulatedStore, StoreError};
use crate::vfl::{Vfl, VflConfig, VflError};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("population too small: need {need} distinct (file, block) reads, have {have}")]
    PopulationTooSmall { need: u64, have: u64 },
    #[error("bad bench configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Vfl(#[from] VflError),
    #[error(transparent)]
    Meta(#[from] MetaError),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Simulated,
    Wallclock,
}

impl BenchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMode::Simulated => "simulated",
            BenchMode::Wallclock => "wallclock",
        }
    }
}

/// One measurement row.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BenchRow {
    /// The swept parameter: block size in bytes, or client count.
    pub parameter: u64,
    pub bytes: u64,
    pub seconds: f64,
    pub mbps: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    /// Echo of the configuration that produced the rows.
    pub config: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// CSV with the fixed column set `parameter,bytes,seconds,MBps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,bytes,seconds,MBps\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.parameter, row.bytes, row.seconds, row.mbps
            ));
        }
        out
    }
}

fn make_row(parameter: u64, bytes: u64, seconds: f64) -> BenchRow {
    BenchRow {
        parameter,
        bytes,
        seconds,
        mbps: bytes as f64 / seconds / 1e6,
    }
}

/// Modeled single-stream throughput for one request of `block_bytes`:
/// `block / (overhead + latency + block / bandwidth)` bytes per second.
pub fn model_throughput(block_bytes: u64, model: &NetworkModel) -> f64 {
    block_bytes as f64 / model.request_seconds(block_bytes)
}

/// The measured loopback shape the simulator defaults to: 40 us request
/// latency and 8.6 Gbit/s of stream bandwidth.
pub fn default_model() -> NetworkModel {
    NetworkModel::new(40e-6, 8.6e9 / 8.0, 0.0).expect("constants are valid")
}

/// The canonical eleven power-of-two sweep sizes, 32 KiB through 32 MiB.
pub fn default_sweep_sizes() -> Vec<u64> {
    (15..=25).map(|e| 1u64 << e).collect()
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SweepConfig {
    pub sizes: Vec<u64>,
    /// Single-block random reads per size; each hits a distinct
    /// (file, block) pair so the cache never helps.
    pub reads_per_size: u32,
    pub file_count: u32,
    pub file_size: u64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.reads_per_size == 0 || self.file_count == 0 {
            return Err(BenchError::BadConfig("empty sweep".into()));
        }
        let max = *self.sizes.iter().max().expect("nonempty");
        if self.file_size <= max {
            return Err(BenchError::BadConfig(format!(
                "files ({} bytes) must be larger than the largest block ({max})",
                self.file_size
            )));
        }
        for &size in &self.sizes {
            if !size.is_power_of_two() || size < 4096 {
                return Err(BenchError::BadConfig(format!("bad block size {size}")));
            }
            let have = self.file_count as u64 * (self.file_size / size);
            if (self.reads_per_size as u64) > have {
                return Err(BenchError::PopulationTooSmall {
                    need: self.reads_per_size as u64,
                    have,
                });
            }
        }
        Ok(())
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: default_sweep_sizes(),
            reads_per_size: 8,
            file_count: 4,
            file_size: 64 << 20,
            seed: 7,
        }
    }
}

fn bench_key(i: u32) -> ObjectKey {
    ObjectKey {
        bucket: "bench".into(),
        key: format!("f{i:04}"),
    }
}

fn populate<S: ObjectStore + ?Sized>(store: &S, cfg: &SweepConfig) -> Result<Arc<MemoryMetastore>> {
    let meta = Arc::new(MemoryMetastore::new());
    let zeros = vec![0u8; cfg.file_size as usize];
    for i in 0..cfg.file_count {
        let key = bench_key(i);
        let m = store.put(&key, &zeros)?;
        meta.set_meta(&FileMeta::file(format!("/bench/f{i:04}"), key, m.size, m.mtime))?;
    }
    Ok(meta)
}

/// The sweep core: for each block size, `reads_per_size` single random
/// block reads through a cold virtual file layer. `clock` supplies
/// seconds in whatever timebase the caller measures.
fn run_sweep<S, C>(store: &Arc<S>, meta: &Arc<MemoryMetastore>, cfg: &SweepConfig, clock: C) -> Result<Vec<BenchRow>>
where
    S: ObjectStore + ?Sized + 'static,
    C: Fn() -> f64,
{
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        // Every full-block position in the population, shuffled; taking a
        // prefix gives distinct positions, so every read is a miss.
        let blocks_per_file = cfg.file_size / size;
        let mut positions: Vec<(u32, u64)> = (0..cfg.file_count)
            .flat_map(|f| (0..blocks_per_file).map(move |b| (f, b)))
            .collect();
        positions.shuffle(&mut rng);
        positions.truncate(cfg.reads_per_size as usize);

        let vfl = Vfl::new(
            Arc::clone(store),
            Arc::clone(meta),
            VflConfig {
                block_size: size,
                readahead_blocks: 0,
                cache_capacity: size.max(64 << 20),
            },
        )?;
        let started = clock();
        let mut bytes = 0u64;
        for (f, b) in positions {
            let mut handle = vfl.open(&format!("/bench/f{f:04}"))?;
            let got = vfl.read_at(&mut handle, b * size, size)?;
            bytes += got.len() as u64;
        }
        let seconds = clock() - started;
        rows.push(make_row(size, bytes, seconds));
    }
    Ok(rows)
}

/// Deterministic sweep against the analytic model on a virtual clock.
pub fn blocksize_sweep_sim(model: NetworkModel, cfg: &SweepConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let store = Arc::new(SimulatedStore::new(MemoryStore::new(), model));
    let meta = populate(store.as_ref(), cfg)?;
    store.reset_clock();
    let clock_store = Arc::clone(&store);
    let rows = run_sweep(&store, &meta, cfg, move || clock_store.virtual_seconds())?;
    Ok(BenchReport {
        mode: BenchMode::Simulated,
        config: serde_json::to_string(&(cfg, model)).expect("config serializes"),
        rows,
    })
}

/// The same sweep timed with the host clock. Numbers depend on the
/// machine; use them for curiosity, not acceptance.
pub fn blocksize_sweep_wall<S: ObjectStore + ?Sized + 'static>(store: Arc<S>, cfg: &SweepConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let meta = populate(store.as_ref(), cfg)?;
    let begin = std::time::Instant::now();
    let rows = run_sweep(&store, &meta, cfg, move || begin.elapsed().as_secs_f64())?;
    Ok(BenchReport {
        mode: BenchMode::Wallclock,
        config: serde_json::to_string(cfg).expect("config serializes"),
        rows,
    })
}

/// Concurrent clients sharing a backbone, min-share fair: each client
/// moves at `min(per_client, backbone / n)`, so aggregate bandwidth
/// saturates at the backbone while per-client rate degrades.
pub fn aggregate_scaling(
    client_counts: &[u32],
    per_client_bps: f64,
    backbone_bps: f64,
) -> Result<BenchReport> {
    if !(per_client_bps > 0.0 && backbone_bps > 0.0) {
        return Err(BenchError::BadConfig("bandwidths must be positive".into()));
    }
    if client_counts.is_empty() || client_counts.contains(&0) {
        return Err(BenchError::BadConfig("client counts must be positive".into()));
    }
    // Each simulated client pulls one virtual gigabyte.
    const PER_CLIENT_BYTES: u64 = 1 << 30;
    let mut rows: Vec<BenchRow> = client_counts
        .iter()
        .map(|&n| {
            let rate = per_client_bps.min(backbone_bps / n as f64);
            let seconds = PER_CLIENT_BYTES as f64 / rate;
            make_row(n as u64, n as u64 * PER_CLIENT_BYTES, seconds)
        })
        .collect();
    rows.sort_by_key(|r| r.parameter);
    Ok(BenchReport {
        mode: BenchMode::Simulated,
        config: format!(
            "{{\"per_client_bps\":{per_client_bps},\"backbone_bps\":{backbone_bps}}}"
        ),
        rows,
    })
}

/// Outcome of the cache-reuse comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReuseReport {
    pub cached_mbps: f64,
    pub refetch_mbps: f64,
    /// How many times faster block caching is than refetching the whole
    /// object for every read.
    pub advantage: f64,
    pub config: String,
}

/// Repeated random block reads within a working set that fits in cache:
/// the block-cache strategy pays for each block once, the naive strategy
/// refetches the whole object on every read. The advantage grows with the
/// object-to-block ratio and the amount of reuse.
pub fn reuse_advantage(
    model: NetworkModel,
    file_count: u32,
    file_size: u64,
    block_size: u64,
    reads: u32,
    seed: u64,
) -> Result<ReuseReport> {
    if !file_size.is_multiple_of(block_size) || file_size == 0 {
        return Err(BenchError::BadConfig(
            "file size must be a multiple of the block size".into(),
        ));
    }
    let cfg = SweepConfig {
        sizes: vec![block_size],
        reads_per_size: reads,
        file_count,
        file_size,
        seed,
    };
    let store = Arc::new(SimulatedStore::new(MemoryStore::new(), model));
    let meta = populate(store.as_ref(), &cfg)?;
    store.reset_clock();

    // Cached strategy: one layer sized to hold the whole working set,
    // reads sampled with replacement.
    let vfl = Vfl::new(
        Arc::clone(&store),
        Arc::clone(&meta),
        VflConfig {
            block_size,
            readahead_blocks: 0,
            cache_capacity: file_count as u64 * file_size,
        },
    )?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    let blocks_per_file = file_size / block_size;
    let mut useful = 0u64;
    let mut picks = Vec::with_capacity(reads as usize);
    for _ in 0..reads {
        let f = rng.gen_range(0..file_count);
        let b = rng.gen_range(0..blocks_per_file);
        picks.push((f, b));
        let mut handle = vfl.open(&format!("/bench/f{f:04}"))?;
        useful += vfl.read_at(&mut handle, b * block_size, block_size)?.len() as u64;
    }
    let cached_seconds = store.virtual_seconds();
    let cached_mbps = useful as f64 / cached_seconds / 1e6;

    // Naive strategy: the same reads, but each one pulls the entire
    // object to extract its block.
    let refetch_seconds: f64 = picks
        .iter()
        .map(|_| model.request_seconds(file_size))
        .sum();
    let refetch_mbps = useful as f64 / refetch_seconds / 1e6;

    Ok(ReuseReport {
        cached_mbps,
        refetch_mbps,
        advantage: cached_mbps / refetch_mbps,
        config: serde_json::to_string(&cfg).expect("config serializes"),
    })
}
