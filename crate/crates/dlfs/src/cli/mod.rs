//! The `dlfs` command-line tool: one binary exposing every subsystem.
//!
//! Exit codes: 0 success, 1 operational error, 2 usage error. Machine
//! output (JSON or CSV) goes to stdout; diagnostics to stderr.

mod config;

pub use config::{open_store_uri, parse_band_list, Config, STORE_ENV};

use std::io::{Read, Write};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::analytics::{
    colorize, composite_reduce, segment_fields, segmentation_to_geojson,
};
use crate::bench::{
    aggregate_scaling, blocksize_sweep_sim, blocksize_sweep_wall, default_model,
    default_sweep_sizes, reuse_advantage, BenchMode, SweepConfig,
};
use crate::ingest::{run_manifest, IngestOptions, Manifest};
use crate::meta::client::RemoteQueue;
use crate::meta::server::MetaServer;
use crate::meta::{import_objects, FileKind, Metastore};
use crate::queue::{drain, Outcome, Task, TaskBroker};
use crate::raster::codec::{decode_tile, encode_tile};
use crate::raster::RasterTile;
use crate::store::{NetworkModel, ObjectKey, ObjectStore};
use crate::tiling::{
    lonlat_to_utm, span_count, tile_bounds, tile_index, TileKey, TileSpec,
};
use crate::vfl::Vfl;

#[derive(Parser)]
#[command(
    name = "dlfs",
    version,
    about = "Virtual file layer over object storage, with tiling, raster analytics, a task queue, and an I/O benchmark harness"
)]
struct Cli {
    /// Config file of `key = value` lines (see the guide for the grammar)
    #[arg(long, global = true)]
    config: Option<String>,
    /// Object store URI: memory | dir:<path> | sim:<lat_s>:<Bps>:<ovh_s>:<inner>
    #[arg(long, global = true)]
    store: Option<String>,
    /// Metadata server endpoint (host:port); also DLFS_METASTORE
    #[arg(long, global = true)]
    metastore: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Object store operations
    #[command(subcommand)]
    Store(StoreCmd),
    /// Metadata service operations
    #[command(subcommand)]
    Meta(MetaCmd),
    /// File-layer operations (stat, ls, cat, cache stats)
    #[command(subcommand)]
    Fs(FsCmd),
    /// Tiling arithmetic
    #[command(subcommand)]
    Tile(TileCmd),
    /// Scene ingest
    #[command(subcommand)]
    Ingest(IngestCmd),
    /// Field segmentation
    #[command(subcommand)]
    Segment(SegmentCmd),
    /// Cloud-free compositing
    #[command(subcommand)]
    Composite(CompositeCmd),
    /// Task queue
    #[command(subcommand)]
    Queue(QueueCmd),
    /// Benchmarks
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum StoreCmd {
    /// Write an object from a file or stdin
    Put {
        bucket: String,
        key: String,
        /// Input file; stdin when omitted
        #[arg(long)]
        file: Option<String>,
    },
    /// Read an object (or a byte range of it) to stdout
    Get {
        bucket: String,
        key: String,
        #[arg(long)]
        offset: Option<u64>,
        #[arg(long)]
        length: Option<u64>,
    },
    /// List keys as JSON
    Ls {
        bucket: String,
        #[arg(long, default_value = "")]
        prefix: String,
    },
}

#[derive(Subcommand)]
enum MetaCmd {
    /// Run the metadata + queue server in the foreground
    Serve {
        #[arg(long, default_value = "127.0.0.1:7171")]
        addr: String,
    },
    /// Import an object listing as file records under a mount path
    Import {
        #[arg(long)]
        bucket: String,
        #[arg(long, default_value = "")]
        prefix: String,
        #[arg(long, default_value = "/data")]
        mount: String,
    },
}

#[derive(Subcommand)]
enum FsCmd {
    /// Stat a path (JSON record)
    Stat { path: String },
    /// List a directory (JSON entries)
    Ls { path: String },
    /// Stream file bytes to stdout
    Cat { path: String },
    /// Read files through the layer, then print cache statistics
    Stats {
        /// Files to read before reporting; repeatable
        #[arg(long)]
        warm: Vec<String>,
    },
}

#[derive(Subcommand)]
enum TileCmd {
    /// Tile index of a point, by lon/lat or easting/northing
    Index(TileIndexArgs),
    /// Bounds of a tile as JSON
    Bounds {
        #[arg(long)]
        zone: u8,
        #[arg(long)]
        i: i32,
        #[arg(long)]
        j: i32,
        /// Include the border overlap
        #[arg(long)]
        border: bool,
    },
    /// Tiles needed to span a distance
    Span {
        #[arg(long)]
        distance: f64,
        #[arg(long)]
        tilepx: u32,
        #[arg(long)]
        res: f64,
    },
    /// Web-Mercator tile count at a level
    Webmercator {
        #[arg(long)]
        level: u32,
    },
}

#[derive(Args)]
struct TileIndexArgs {
    #[arg(long, requires = "lat", conflicts_with_all = ["easting", "northing"])]
    lon: Option<f64>,
    #[arg(long, requires = "lon")]
    lat: Option<f64>,
    #[arg(long, requires_all = ["northing", "zone"])]
    easting: Option<f64>,
    #[arg(long)]
    northing: Option<f64>,
    #[arg(long)]
    zone: Option<u8>,
}

#[derive(Subcommand)]
enum IngestCmd {
    /// Process one scene manifest
    Run {
        #[arg(long)]
        manifest: String,
    },
}

#[derive(Subcommand)]
enum SegmentCmd {
    /// Segment the tile stack under a directory path into fields
    Run {
        /// Metadata directory holding the stack, e.g. /tiles/z36/0/0
        #[arg(long)]
        tile: String,
        /// GeoJSON output path; `-` for stdout
        #[arg(long, default_value = "-")]
        out: String,
        /// Edge threshold override (default: Otsu)
        #[arg(long)]
        threshold: Option<f64>,
        /// Colorized label preview (PPM)
        #[arg(long)]
        preview: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum CompositeCmd {
    /// Composite the tile stack under a directory path
    Run {
        /// Metadata directory holding the stack
        #[arg(long)]
        tiles: String,
        /// Output tile path; `-` for stdout
        #[arg(long, default_value = "-")]
        out: String,
        /// Also store the tile as bucket/key
        #[arg(long)]
        put: Option<String>,
        /// RGB preview path (PPM)
        #[arg(long)]
        preview: Option<String>,
        /// Bands for the preview, as r,g,b indices
        #[arg(long, default_value = "0,1,2")]
        preview_bands: String,
    },
}

#[derive(Subcommand)]
enum QueueCmd {
    /// Add a task
    Enqueue {
        #[arg(long)]
        kind: String,
        /// Inline JSON, or @path to read a file
        #[arg(long)]
        payload: String,
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value_t = crate::queue::DEFAULT_MAX_ATTEMPTS)]
        max_attempts: u32,
    },
    /// Run workers until the queue drains
    Worker {
        #[arg(long, default_value_t = 1)]
        concurrency: usize,
    },
    /// Queue statistics as JSON
    Stats,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Block-size sweep
    Sweep {
        /// Comma-separated block sizes in bytes; default 32Ki..32Mi doubling
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, default_value = "sim")]
        mode: String,
        /// Also write the CSV here
        #[arg(long)]
        report: Option<String>,
        #[arg(long, default_value_t = 8)]
        reads: u32,
        #[arg(long, default_value_t = 4)]
        files: u32,
        #[arg(long, default_value_t = 64 << 20)]
        file_size: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 40e-6)]
        latency: f64,
        #[arg(long, default_value_t = 8.6e9 / 8.0)]
        bandwidth: f64,
        #[arg(long, default_value_t = 0.0)]
        overhead: f64,
    },
    /// Client-count scaling under a shared backbone
    Scale {
        #[arg(long, default_value = "1,4,16,64,128,512")]
        clients: String,
        #[arg(long, default_value_t = 1e9)]
        per_client: f64,
        #[arg(long, default_value_t = 32e9)]
        backbone: f64,
        #[arg(long)]
        report: Option<String>,
    },
    /// Block-cache reuse advantage over whole-object refetching
    Reuse {
        #[arg(long, default_value_t = 2)]
        files: u32,
        #[arg(long, default_value_t = 64 << 20)]
        file_size: u64,
        #[arg(long, default_value_t = 4 << 20)]
        block: u64,
        #[arg(long, default_value_t = 256)]
        reads: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 40e-6)]
        latency: f64,
        #[arg(long, default_value_t = 8.6e9 / 8.0)]
        bandwidth: f64,
        #[arg(long, default_value_t = 0.0)]
        overhead: f64,
    },
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(store) = cli.store {
        cfg.store_uri = store;
    }
    if let Some(metastore) = cli.metastore {
        cfg.metastore = Some(metastore);
    }
    match cli.command {
        Command::Store(cmd) => store_cmd(&cfg, cmd),
        Command::Meta(cmd) => meta_cmd(&cfg, cmd),
        Command::Fs(cmd) => fs_cmd(&cfg, cmd),
        Command::Tile(cmd) => tile_cmd(&cfg, cmd),
        Command::Ingest(cmd) => ingest_cmd(&cfg, cmd),
        Command::Segment(cmd) => segment_cmd(&cfg, cmd),
        Command::Composite(cmd) => composite_cmd(&cfg, cmd),
        Command::Queue(cmd) => queue_cmd(&cfg, cmd),
        Command::Bench(cmd) => bench_cmd(&cfg, cmd),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer(&mut stdout, value)?;
    stdout.write_all(b"\n")?;
    Ok(())
}

fn write_out(path: &str, bytes: &[u8]) -> Result<()> {
    if path == "-" {
        std::io::stdout().lock().write_all(bytes)?;
    } else {
        std::fs::write(path, bytes).with_context(|| format!("writing {path}"))?;
    }
    Ok(())
}

fn store_cmd(cfg: &Config, cmd: StoreCmd) -> Result<()> {
    let store = cfg.open_store()?;
    match cmd {
        StoreCmd::Put { bucket, key, file } => {
            let data = match file {
                Some(path) => std::fs::read(&path).with_context(|| format!("reading {path}"))?,
                None => {
                    let mut buf = Vec::new();
                    std::io::stdin().lock().read_to_end(&mut buf)?;
                    buf
                }
            };
            let meta = store.put(&ObjectKey::new(bucket, key)?, &data)?;
            print_json(&meta)
        }
        StoreCmd::Get {
            bucket,
            key,
            offset,
            length,
        } => {
            let key = ObjectKey::new(bucket, key)?;
            let bytes = match (offset, length) {
                (None, None) => store.get(&key)?,
                (off, len) => {
                    let meta = store.head(&key)?;
                    let off = off.unwrap_or(0);
                    store.get_range(&key, off, len.unwrap_or(meta.size.saturating_sub(off)))?
                }
            };
            std::io::stdout().lock().write_all(&bytes)?;
            Ok(())
        }
        StoreCmd::Ls { bucket, prefix } => {
            let keys = store.list(&bucket, &prefix)?;
            print_json(&keys)
        }
    }
}

fn meta_cmd(cfg: &Config, cmd: MetaCmd) -> Result<()> {
    match cmd {
        MetaCmd::Serve { addr } => {
            let server = MetaServer::bind(&addr)?;
            eprintln!("serving metadata and queue on {}", server.local_addr());
            server.serve_forever()?;
            Ok(())
        }
        MetaCmd::Import {
            bucket,
            prefix,
            mount,
        } => {
            let store = cfg.open_store()?;
            let meta = cfg.open_metastore();
            let written = import_objects(store.as_ref(), meta.as_ref(), &bucket, &prefix, &mount)?;
            print_json(&serde_json::json!({ "imported": written.len(), "paths": written }))
        }
    }
}

fn open_vfl(cfg: &Config) -> Result<Vfl<Arc<dyn ObjectStore>, Arc<dyn Metastore>>> {
    Ok(Vfl::new(cfg.open_store()?, cfg.open_metastore(), cfg.vfl)?)
}

fn cat_to<W: Write>(vfl: &Vfl<Arc<dyn ObjectStore>, Arc<dyn Metastore>>, path: &str, out: &mut W) -> Result<u64> {
    let mut handle = vfl.open(path)?;
    let mut offset = 0u64;
    while offset < handle.size() {
        let chunk = vfl.read_at(&mut handle, offset, vfl.config().block_size)?;
        out.write_all(&chunk)?;
        offset += chunk.len() as u64;
    }
    Ok(offset)
}

fn fs_cmd(cfg: &Config, cmd: FsCmd) -> Result<()> {
    let vfl = open_vfl(cfg)?;
    match cmd {
        FsCmd::Stat { path } => print_json(&vfl.stat(&path)?),
        FsCmd::Ls { path } => {
            let entries: Vec<serde_json::Value> = vfl
                .readdir(&path)?
                .into_iter()
                .map(|(name, kind)| serde_json::json!({ "name": name, "kind": kind }))
                .collect();
            print_json(&entries)
        }
        FsCmd::Cat { path } => {
            let mut stdout = std::io::stdout().lock();
            cat_to(&vfl, &path, &mut stdout)?;
            Ok(())
        }
        FsCmd::Stats { warm } => {
            let mut sink = std::io::sink();
            for path in &warm {
                cat_to(&vfl, path, &mut sink)?;
            }
            print_json(&vfl.cache_stats())
        }
    }
}

fn tile_cmd(cfg: &Config, cmd: TileCmd) -> Result<()> {
    match cmd {
        TileCmd::Index(args) => {
            let (zone, easting, northing) = match (args.lon, args.lat) {
                (Some(lon), Some(lat)) => lonlat_to_utm(lon, lat)?,
                _ => {
                    let easting = args
                        .easting
                        .ok_or_else(|| anyhow!("need --lon/--lat or --easting/--northing/--zone"))?;
                    (args.zone.expect("required by clap"), easting, args.northing.expect("required by clap"))
                }
            };
            let (i, j) = tile_index(easting, northing, &cfg.tile)?;
            print_json(&serde_json::json!({
                "zone": zone, "i": i, "j": j,
                "easting": easting, "northing": northing,
            }))
        }
        TileCmd::Bounds { zone, i, j, border } => {
            let key = TileKey::new(zone, i, j)?;
            print_json(&tile_bounds(&key, &cfg.tile, border))
        }
        TileCmd::Span { distance, tilepx, res } => {
            let spec = TileSpec::new(tilepx, 0, res, 0.0, 0.0)?;
            let count = span_count(distance, &spec)?;
            println!("{count}");
            Ok(())
        }
        TileCmd::Webmercator { level } => {
            println!("{}", crate::tiling::webmercator_tile_count(level)?);
            Ok(())
        }
    }
}

fn ingest_cmd(cfg: &Config, cmd: IngestCmd) -> Result<()> {
    match cmd {
        IngestCmd::Run { manifest } => {
            let text = std::fs::read_to_string(&manifest)
                .with_context(|| format!("reading manifest {manifest}"))?;
            let manifest = Manifest::from_json(&text)?;
            let store = cfg.open_store()?;
            let meta = cfg.open_metastore();
            let options = IngestOptions {
                bucket: cfg.ingest_bucket.clone(),
                edge_clean_depth: cfg.edge_clean_depth,
            };
            let report = run_manifest(store.as_ref(), meta.as_ref(), &manifest, &cfg.tile, &options)?;
            print_json(&report)
        }
    }
}

/// Read every `.dlt` file under a metadata directory, sorted by name.
fn read_tile_stack(vfl: &Vfl<Arc<dyn ObjectStore>, Arc<dyn Metastore>>, dir: &str) -> Result<Vec<RasterTile>> {
    let mut names: Vec<String> = vfl
        .readdir(dir)?
        .into_iter()
        .filter(|(name, kind)| *kind == FileKind::File && name.ends_with(".dlt"))
        .map(|(name, _)| name)
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no .dlt tiles under {dir}");
    }
    let mut stack = Vec::with_capacity(names.len());
    for name in names {
        let path = format!("{}/{}", dir.trim_end_matches('/'), name);
        let mut bytes = Vec::new();
        cat_to(vfl, &path, &mut bytes)?;
        stack.push(decode_tile(&bytes)?);
    }
    Ok(stack)
}

fn write_ppm(path: &str, width: u32, height: u32, rgb: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(rgb.len() + 32);
    out.extend_from_slice(format!("P6\n{width} {height}\n255\n").as_bytes());
    out.extend_from_slice(rgb);
    write_out(path, &out)
}

fn segment_cmd(cfg: &Config, cmd: SegmentCmd) -> Result<()> {
    match cmd {
        SegmentCmd::Run {
            tile,
            out,
            threshold,
            preview,
            seed,
        } => {
            let vfl = open_vfl(cfg)?;
            let stack = read_tile_stack(&vfl, &tile)?;
            let mut params = cfg.segmentation.clone();
            if threshold.is_some() {
                params.edge_threshold = threshold;
            }
            let seg = segment_fields(&stack, &params)?;
            let doc = segmentation_to_geojson(&seg, &stack[0].key, &stack[0].spec);
            write_out(&out, format!("{doc}\n").as_bytes())?;
            if let Some(preview_path) = preview {
                let rgb = colorize(&seg.labels, seed.unwrap_or(cfg.seed));
                write_ppm(&preview_path, seg.width, seg.height, &rgb)?;
            }
            eprintln!(
                "segmented {} images into {} fields (threshold {:.6})",
                stack.len(),
                seg.component_count,
                seg.threshold_used
            );
            Ok(())
        }
    }
}

/// Linear reflectance-to-u8 stretch for previews.
fn band_to_u8(tile: &RasterTile, band: u16) -> Result<Vec<u8>> {
    let values = tile.band_f64(band)?;
    Ok(values
        .iter()
        .zip(&tile.valid)
        .map(|(&v, &ok)| if ok { (v.clamp(0.0, 1.0) * 255.0) as u8 } else { 0 })
        .collect())
}

fn composite_cmd(cfg: &Config, cmd: CompositeCmd) -> Result<()> {
    match cmd {
        CompositeCmd::Run {
            tiles,
            out,
            put,
            preview,
            preview_bands,
        } => {
            let vfl = open_vfl(cfg)?;
            let stack = read_tile_stack(&vfl, &tiles)?;
            let tile = composite_reduce(&stack, &cfg.composite)?;
            let encoded = encode_tile(&tile)?;
            write_out(&out, &encoded)?;
            if let Some(spec) = put {
                let (bucket, key) = spec
                    .split_once('/')
                    .ok_or_else(|| anyhow!("--put takes bucket/key"))?;
                vfl.store().put(&ObjectKey::new(bucket, key)?, &encoded)?;
            }
            if let Some(preview_path) = preview {
                let bands = parse_band_list(&preview_bands)?;
                if bands.len() != 3 {
                    bail!("--preview-bands takes exactly three indices");
                }
                let channels: Vec<Vec<u8>> = bands
                    .iter()
                    .map(|&b| band_to_u8(&tile, b.min(tile.bands - 1)))
                    .collect::<Result<_>>()?;
                let mut rgb = Vec::with_capacity(tile.pixel_count() * 3);
                for p in 0..tile.pixel_count() {
                    for channel in &channels {
                        rgb.push(channel[p]);
                    }
                }
                write_ppm(&preview_path, tile.width, tile.height, &rgb)?;
            }
            eprintln!(
                "composited {} images; {} of {} pixels valid",
                stack.len(),
                tile.valid.iter().filter(|&&v| v).count(),
                tile.pixel_count()
            );
            Ok(())
        }
    }
}

fn queue_cmd(cfg: &Config, cmd: QueueCmd) -> Result<()> {
    let broker = RemoteQueue::connect(cfg.queue_endpoint()?);
    match cmd {
        QueueCmd::Enqueue {
            kind,
            payload,
            id,
            max_attempts,
        } => {
            let payload = match payload.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
                None => payload,
            };
            let id = id.unwrap_or_else(|| {
                format!(
                    "t-{}-{}",
                    std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .map(|d| d.as_nanos())
                        .unwrap_or(0),
                    std::process::id()
                )
            });
            broker
                .enqueue(&id, &kind, &payload, max_attempts)
                .map_err(|e| anyhow!("{e}"))?;
            print_json(&serde_json::json!({ "id": id }))
        }
        QueueCmd::Worker { concurrency } => {
            let cfg = cfg.clone();
            let handler = move |task: &Task| execute_task(&cfg, task);
            let settled = drain(&broker, concurrency, "worker-", handler).map_err(|e| anyhow!("{e}"))?;
            print_json(&serde_json::json!({ "settled": settled }))
        }
        QueueCmd::Stats => {
            let stats = broker.stats().map_err(|e| anyhow!("{e}"))?;
            print_json(&stats)
        }
    }
}

/// Execute one claimed task by kind. Failures retry until the attempt
/// budget is spent.
fn execute_task(cfg: &Config, task: &Task) -> Outcome {
    let result = (|| -> Result<()> {
        match task.kind.as_str() {
            "ingest" => {
                let manifest: Manifest = serde_json::from_value(task.payload.clone())?;
                let store = cfg.open_store()?;
                let meta = cfg.open_metastore();
                let options = IngestOptions {
                    bucket: cfg.ingest_bucket.clone(),
                    edge_clean_depth: cfg.edge_clean_depth,
                };
                run_manifest(store.as_ref(), meta.as_ref(), &manifest, &cfg.tile, &options)?;
                Ok(())
            }
            "segment" => {
                let spec: WorkSpec = serde_json::from_value(task.payload.clone())?;
                let vfl = open_vfl(cfg)?;
                let stack = read_tile_stack(&vfl, &spec.tiles)?;
                let seg = segment_fields(&stack, &cfg.segmentation)?;
                let doc = segmentation_to_geojson(&seg, &stack[0].key, &stack[0].spec);
                vfl.store().put(&spec.out_key, doc.to_string().as_bytes())?;
                Ok(())
            }
            "composite" => {
                let spec: WorkSpec = serde_json::from_value(task.payload.clone())?;
                let vfl = open_vfl(cfg)?;
                let stack = read_tile_stack(&vfl, &spec.tiles)?;
                let tile = composite_reduce(&stack, &cfg.composite)?;
                vfl.store().put(&spec.out_key, &encode_tile(&tile)?)?;
                Ok(())
            }
            "bench" => {
                let spec: BenchTaskSpec = serde_json::from_value(task.payload.clone())?;
                let report = blocksize_sweep_sim(default_model(), &spec.sweep)?;
                let store = cfg.open_store()?;
                store.put(&spec.out_key, report.to_csv().as_bytes())?;
                Ok(())
            }
            other => bail!("unknown task kind {other:?}"),
        }
    })();
    match result {
        Ok(()) => Outcome::Done,
        Err(e) => {
            eprintln!("task {} attempt {} failed: {e:#}", task.id, task.attempts);
            Outcome::Retry
        }
    }
}

#[derive(serde::Deserialize)]
struct WorkSpec {
    tiles: String,
    out_key: ObjectKey,
}

#[derive(serde::Deserialize)]
struct BenchTaskSpec {
    out_key: ObjectKey,
    sweep: SweepConfig,
}

fn parse_u64_list(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|_| anyhow!("bad number {part:?}"))
        })
        .collect()
}

fn emit_report(report: &crate::bench::BenchReport, file: Option<String>) -> Result<()> {
    let csv = report.to_csv();
    print!("{csv}");
    if let Some(path) = file {
        std::fs::write(&path, &csv).with_context(|| format!("writing {path}"))?;
    }
    eprintln!("# mode={} config={}", report.mode.as_str(), report.config);
    Ok(())
}

fn bench_cmd(cfg: &Config, cmd: BenchCmd) -> Result<()> {
    match cmd {
        BenchCmd::Sweep {
            sizes,
            mode,
            report,
            reads,
            files,
            file_size,
            seed,
            latency,
            bandwidth,
            overhead,
        } => {
            let sweep = SweepConfig {
                sizes: match sizes {
                    Some(text) => parse_u64_list(&text)?,
                    None => default_sweep_sizes(),
                },
                reads_per_size: reads,
                file_count: files,
                file_size,
                seed: seed.unwrap_or(cfg.seed),
            };
            let out = match mode.as_str() {
                "sim" => {
                    let model = NetworkModel::new(latency, bandwidth, overhead)?;
                    blocksize_sweep_sim(model, &sweep)?
                }
                "wall" => blocksize_sweep_wall(cfg.open_store()?, &sweep)?,
                other => bail!("--mode is sim or wall, got {other:?}"),
            };
            debug_assert!(matches!(out.mode, BenchMode::Simulated | BenchMode::Wallclock));
            emit_report(&out, report)
        }
        BenchCmd::Scale {
            clients,
            per_client,
            backbone,
            report,
        } => {
            let counts: Vec<u32> = parse_u64_list(&clients)?.into_iter().map(|n| n as u32).collect();
            let out = aggregate_scaling(&counts, per_client, backbone)?;
            emit_report(&out, report)
        }
        BenchCmd::Reuse {
            files,
            file_size,
            block,
            reads,
            seed,
            latency,
            bandwidth,
            overhead,
        } => {
            let model = NetworkModel::new(latency, bandwidth, overhead)?;
            let out = reuse_advantage(model, files, file_size, block, reads, seed.unwrap_or(cfg.seed))?;
            print_json(&out)
        }
    }
}
