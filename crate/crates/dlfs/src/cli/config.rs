//! Configuration resolution: flags > environment > config file > defaults.
//!
//! The config file is a line-oriented `key = value` document ('#' starts
//! a comment). Recognized keys:
//!
//! ```text
//! store            backend URI (see below)
//! metastore        host:port of the metadata server
//! block_size       bytes              readahead       blocks
//! cache_bytes      bytes
//! tile_px          pixels             border_px       pixels
//! resolution_m     meters/pixel       origin_easting  meters
//! origin_northing  meters
//! cloud_threshold  reflectance        edge_threshold  gradient (unset: Otsu)
//! visible_bands    comma list         red_band / nir_band   band index
//! weight_epsilon   weight floor       seed            integer
//! bucket           ingest output bucket
//! edge_clean_depth pixels
//! ```
//!
//! Store URIs: `memory`, `dir:<path>`, or
//! `sim:<latency_s>:<bandwidth_Bps>:<overhead_s>:<inner URI>`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::analytics::{CompositeParams, SegmentationParams};
use crate::meta::client::{RemoteMetastore, METASTORE_ENV};
use crate::meta::{MemoryMetastore, Metastore};
use crate::store::{DirStore, MemoryStore, NetworkModel, ObjectStore, SimulatedStore};
use crate::tiling::TileSpec;
use crate::vfl::VflConfig;
use anyhow::{bail, Context, Result};

pub const STORE_ENV: &str = "DLFS_STORE";

#[derive(Debug, Clone)]
pub struct Config {
    pub store_uri: String,
    pub metastore: Option<String>,
    pub vfl: VflConfig,
    pub tile: TileSpec,
    pub segmentation: SegmentationParams,
    pub composite: CompositeParams,
    pub ingest_bucket: String,
    pub edge_clean_depth: u32,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            store_uri: "memory".into(),
            metastore: None,
            vfl: VflConfig::default(),
            tile: TileSpec::default(),
            segmentation: SegmentationParams::default(),
            composite: CompositeParams::default(),
            ingest_bucket: "tiles".into(),
            edge_clean_depth: crate::ingest::DEFAULT_EDGE_CLEAN_DEPTH,
            seed: 0,
        }
    }
}

fn parse_kv_document(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got {raw:?}", lineno + 1);
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

impl Config {
    /// Defaults, then the optional config file, then the environment.
    /// Flag overrides are applied by the command layer afterwards.
    pub fn load(config_path: Option<&str>) -> Result<Config> {
        let mut cfg = Config::default();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {path}"))?;
            cfg.apply_document(&parse_kv_document(&text)?)?;
        }
        if let Ok(uri) = std::env::var(STORE_ENV) {
            cfg.store_uri = uri;
        }
        if let Ok(endpoint) = std::env::var(METASTORE_ENV) {
            cfg.metastore = Some(endpoint);
        }
        cfg.vfl = cfg.vfl.overridden_from_env().map_err(anyhow::Error::from)?;
        Ok(cfg)
    }

    fn apply_document(&mut self, doc: &BTreeMap<String, String>) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| anyhow::anyhow!("config key {key}: bad value {value:?}"))
        }
        for (key, value) in doc {
            match key.as_str() {
                "store" => self.store_uri = value.clone(),
                "metastore" => self.metastore = Some(value.clone()),
                "block_size" => self.vfl.block_size = parse(key, value)?,
                "readahead" => self.vfl.readahead_blocks = parse(key, value)?,
                "cache_bytes" => self.vfl.cache_capacity = parse(key, value)?,
                "tile_px" => self.tile.tile_px = parse(key, value)?,
                "border_px" => self.tile.border_px = parse(key, value)?,
                "resolution_m" => self.tile.resolution_m = parse(key, value)?,
                "origin_easting" => self.tile.origin_easting_m = parse(key, value)?,
                "origin_northing" => self.tile.origin_northing_m = parse(key, value)?,
                "cloud_threshold" => {
                    let t: f64 = parse(key, value)?;
                    self.segmentation.cloud_threshold = t;
                    self.composite.cloud_threshold = t;
                }
                "edge_threshold" => self.segmentation.edge_threshold = Some(parse(key, value)?),
                "visible_bands" => {
                    let bands = parse_band_list(value)?;
                    self.segmentation.visible_bands = bands.clone();
                    self.composite.visible_bands = bands;
                }
                "red_band" => self.composite.red_band = parse(key, value)?,
                "nir_band" => self.composite.nir_band = parse(key, value)?,
                "weight_epsilon" => self.composite.weight_epsilon = parse(key, value)?,
                "bucket" => self.ingest_bucket = value.clone(),
                "edge_clean_depth" => self.edge_clean_depth = parse(key, value)?,
                "seed" => self.seed = parse(key, value)?,
                other => bail!("unknown config key {other:?}"),
            }
        }
        Ok(())
    }

    /// Build the configured object store.
    pub fn open_store(&self) -> Result<Arc<dyn ObjectStore>> {
        open_store_uri(&self.store_uri)
    }

    /// Build the configured metadata service: remote when an endpoint is
    /// set, otherwise a fresh in-process store (single-command lifetime).
    pub fn open_metastore(&self) -> Arc<dyn Metastore> {
        match &self.metastore {
            Some(endpoint) => Arc::new(RemoteMetastore::connect(endpoint.clone())),
            None => Arc::new(MemoryMetastore::new()),
        }
    }

    /// Endpoint for queue commands, which always need the shared server.
    pub fn queue_endpoint(&self) -> Result<String> {
        self.metastore
            .clone()
            .ok_or_else(|| anyhow::anyhow!("queue commands need {METASTORE_ENV} or `metastore` configured"))
    }
}

pub fn parse_band_list(value: &str) -> Result<Vec<u16>> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<u16>()
                .map_err(|_| anyhow::anyhow!("bad band index {part:?}"))
        })
        .collect()
}

pub fn open_store_uri(uri: &str) -> Result<Arc<dyn ObjectStore>> {
    if uri == "memory" {
        return Ok(Arc::new(MemoryStore::new()));
    }
    if let Some(path) = uri.strip_prefix("dir:") {
        return Ok(Arc::new(DirStore::open(path)?));
    }
    if let Some(rest) = uri.strip_prefix("sim:") {
        let parts: Vec<&str> = rest.splitn(4, ':').collect();
        if parts.len() != 4 {
            bail!("sim store URI is sim:<latency_s>:<bandwidth_Bps>:<overhead_s>:<inner>");
        }
        let latency: f64 = parts[0].parse().context("sim latency")?;
        let bandwidth: f64 = parts[1].parse().context("sim bandwidth")?;
        let overhead: f64 = parts[2].parse().context("sim overhead")?;
        let inner = open_store_uri(parts[3])?;
        let model = NetworkModel::new(latency, bandwidth, overhead)?;
        return Ok(Arc::new(SimulatedStore::new(inner, model)));
    }
    bail!("unrecognized store URI {uri:?} (expected memory, dir:<path>, or sim:...)");
}
