//! GeoJSON serialization of segmentation output.
//!
//! One Feature per labeled field: properties carry the label and tile
//! address, geometry is a Polygon in easting/northing meters, and the
//! collection names its UTM zone in a `crs` member.

use serde_json::{json, Value};

use super::FieldSegmentation;
use crate::tiling::{TileKey, TileSpec};

pub fn segmentation_to_geojson(seg: &FieldSegmentation, key: &TileKey, spec: &TileSpec) -> Value {
    let features: Vec<Value> = seg
        .polygons
        .iter()
        .map(|poly| {
            let rings: Vec<Vec<[f64; 2]>> = poly
                .rings
                .iter()
                .map(|ring| {
                    let mut coords: Vec<[f64; 2]> = ring.iter().map(|&(e, n)| [e, n]).collect();
                    if let Some(&first) = coords.first() {
                        coords.push(first); // GeoJSON rings close explicitly
                    }
                    coords
                })
                .collect();
            json!({
                "type": "Feature",
                "properties": {
                    "label": poly.label,
                    "zone": key.zone,
                    "tile_i": key.i,
                    "tile_j": key.j,
                },
                "geometry": {
                    "type": "Polygon",
                    "coordinates": rings,
                },
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "crs": {
            "type": "name",
            "properties": { "name": format!("UTM zone {}", key.zone) },
        },
        "properties": {
            "resolution_m": spec.resolution_m,
            "tile_px": spec.tile_px,
            "border_px": spec.border_px,
        },
        "features": features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{segment_fields, SegmentationParams};
    use crate::raster::{PixelData, RasterTile};

    #[test]
    fn geojson_structure() {
        let side = 8u32;
        let spec = TileSpec::new(side, 0, 10.0, 0.0, 0.0).unwrap();
        let key = TileKey::new(36, 2, -3).unwrap();
        let n = (side * side) as usize;
        let values: Vec<f32> = (0..n)
            .map(|p| if p % side as usize >= 4 { 0.4 } else { 0.1 })
            .collect();
        let tile = RasterTile::new(key, spec, side, side, 1, PixelData::F32(values), vec![true; n], 0, 8).unwrap();
        let seg = segment_fields(
            std::slice::from_ref(&tile),
            &SegmentationParams {
                visible_bands: vec![0],
                cloud_threshold: 1.0,
                edge_threshold: Some(0.1),
            },
        )
        .unwrap();
        assert_eq!(seg.component_count, 2);

        let doc = segmentation_to_geojson(&seg, &key, &spec);
        assert_eq!(doc["type"], "FeatureCollection");
        assert_eq!(doc["crs"]["properties"]["name"], "UTM zone 36");
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 2);
        for f in features {
            assert_eq!(f["properties"]["zone"], 36);
            assert_eq!(f["properties"]["tile_i"], 2);
            assert_eq!(f["properties"]["tile_j"], -3);
            let rings = f["geometry"]["coordinates"].as_array().unwrap();
            for ring in rings {
                let ring = ring.as_array().unwrap();
                assert!(ring.len() >= 4);
                assert_eq!(ring.first(), ring.last());
            }
        }
        // Valid JSON end to end.
        let text = serde_json::to_string(&doc).unwrap();
        let _: Value = serde_json::from_str(&text).unwrap();
    }
}
