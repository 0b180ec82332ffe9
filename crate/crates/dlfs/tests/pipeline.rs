//! End-to-end: ingest a synthetic scene into a directory-backed store,
//! read the tiles back through the virtual file layer, segment and
//! composite them.

use std::sync::Arc;

use dlfs::analytics::{composite_reduce, segment_fields, CompositeParams, SegmentationParams};
use dlfs::ingest::{process_scene, BandCal, IngestOptions, Scene, SceneMeta};
use dlfs::meta::{MemoryMetastore, Metastore};
use dlfs::raster::codec::decode_tile;
use dlfs::raster::rawg::SceneRaster;
use dlfs::raster::{PixelData, RasterTile};
use dlfs::store::{DirStore, MemoryStore, ObjectStore};
use dlfs::tiling::TileSpec;
use dlfs::vfl::{Vfl, VflConfig};

/// Two-band scene: three vertical strips of distinct reflectance-like
/// values, pixel values chosen so calibration lands them in [0, 0.4].
fn synthetic_scene(timestamp: i64) -> Scene {
    let (w, h) = (128u32, 64u32);
    let n = (w * h) as usize;
    let mut dn = vec![0u16; n * 2];
    for r in 0..h as usize {
        for c in 0..w as usize {
            let strip = c / 43; // three strips
            let p = r * w as usize + c;
            dn[p] = (8000 + strip * 5000) as u16;
            dn[n + p] = (12000 + strip * 5000) as u16;
        }
    }
    Scene {
        raster: SceneRaster {
            width: w,
            height: h,
            bands: 2,
            data: PixelData::U16(dn),
            valid: vec![true; n],
            west_easting_m: 0.0,
            north_northing_m: 640.0,
            resolution_m: 10.0,
        },
        meta: SceneMeta {
            sensor: 8,
            timestamp,
            zone: 36,
            bands: vec![
                BandCal { gain: 2e-5, offset: 0.0 },
                BandCal { gain: 2e-5, offset: 0.0 },
            ],
            sun_zenith_deg: 30.0,
            earth_sun_dist_au: 1.0,
        },
    }
}

fn spec() -> TileSpec {
    TileSpec::new(64, 4, 10.0, 0.0, 0.0).unwrap()
}

#[test]
fn ingest_then_read_back_through_the_file_layer() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(DirStore::open(dir.path()).unwrap());
    let meta = Arc::new(MemoryMetastore::new());
    let options = IngestOptions { bucket: "imagery".into(), edge_clean_depth: 2 };

    // Ingest the same grid cell at three times.
    for t in 0..3i64 {
        let report = process_scene(
            &synthetic_scene(1_600_000_000 + t),
            &spec(),
            store.as_ref(),
            meta.as_ref(),
            &options,
        )
        .unwrap();
        assert!(report.failed.is_empty());
        assert!(!report.stored.is_empty());
    }

    let vfl = Vfl::new(
        Arc::clone(&store) as Arc<dyn ObjectStore>,
        Arc::clone(&meta) as Arc<dyn Metastore>,
        VflConfig {
            block_size: 65536,
            readahead_blocks: 1,
            cache_capacity: 16 << 20,
        },
    )
    .unwrap();

    // The namespace is served by metadata alone.
    let z36 = vfl.readdir("/tiles/z36").unwrap();
    assert!(!z36.is_empty());
    let stack_dir = "/tiles/z36/0/0";
    let entries = vfl.readdir(stack_dir).unwrap();
    assert_eq!(entries.len(), 3);

    // Read one tile fully through the layer; bytes must equal the object.
    let path = format!("{stack_dir}/{}", entries[0].0);
    let record = vfl.stat(&path).unwrap();
    let mut handle = vfl.open(&path).unwrap();
    let mut bytes = Vec::new();
    let mut offset = 0u64;
    while offset < handle.size() {
        let chunk = vfl.read_at(&mut handle, offset, 65536).unwrap();
        offset += chunk.len() as u64;
        bytes.extend_from_slice(&chunk);
    }
    let direct = store.get(record.object.as_ref().unwrap()).unwrap();
    assert_eq!(bytes, direct);

    // Decode the stack and run both analytics paths.
    let mut stack: Vec<RasterTile> = Vec::new();
    for (name, _) in &entries {
        let rec = vfl.stat(&format!("{stack_dir}/{name}")).unwrap();
        let raw = store.get(rec.object.as_ref().unwrap()).unwrap();
        stack.push(decode_tile(&raw).unwrap());
    }

    let seg = segment_fields(
        &stack,
        &SegmentationParams {
            visible_bands: vec![0],
            cloud_threshold: 0.9,
            edge_threshold: None,
        },
    )
    .unwrap();
    // Three strips inside the tile; border pixels and strip boundaries are
    // background. Components: the three strips (the tile covers the scene's
    // left 72 columns, so at least strips one and two appear).
    assert!(seg.component_count >= 2, "components {}", seg.component_count);

    let composite = composite_reduce(
        &stack,
        &CompositeParams {
            visible_bands: vec![0],
            cloud_threshold: 0.9,
            red_band: 0,
            nir_band: 1,
            weight_epsilon: 0.01,
        },
    )
    .unwrap();
    // All three inputs are identical and cloud-free: the composite equals
    // each input wherever valid.
    let input = &stack[0];
    for p in 0..composite.pixel_count() {
        if composite.valid[p] {
            assert_eq!(composite.data.get_f64(p), input.data.get_f64(p));
        }
    }
}

/// The pipeline stages buffers in memory only: running against a pure
/// in-memory store leaves the filesystem untouched.
#[test]
fn ingest_writes_no_local_files() {
    let canary = tempfile::tempdir().unwrap();
    let before = std::env::current_dir().unwrap();
    std::env::set_current_dir(canary.path()).unwrap();

    let store = MemoryStore::new();
    let meta = MemoryMetastore::new();
    let report = process_scene(
        &synthetic_scene(1_600_000_000),
        &spec(),
        &store,
        &meta,
        &IngestOptions::default(),
    )
    .unwrap();
    assert!(!report.stored.is_empty());

    let leftovers: Vec<_> = std::fs::read_dir(canary.path()).unwrap().collect();
    std::env::set_current_dir(before).unwrap();
    assert!(leftovers.is_empty(), "pipeline wrote local files: {leftovers:?}");
}
