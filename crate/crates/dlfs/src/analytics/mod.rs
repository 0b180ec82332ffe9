//! Stack analytics: temporal-edge field segmentation and cloud-free
//! compositing over co-registered tile stacks.

pub mod composite;
pub mod edges;
pub mod geojson;
pub mod label;
pub mod polygon;

pub use composite::{
    composite_reduce, composite_weights, CompositeAccumulator, CompositeParams,
};
pub use edges::{edge_stats_update, extract_edges, otsu_threshold, temporal_mean_gradient, EdgeStats};
pub use geojson::segmentation_to_geojson;
pub use label::{colorize, component_count, label_components};
pub use polygon::{polygonize, rasterize_polygons, LabeledPolygon};

use crate::raster::{cloud_mask, RasterError, RasterTile};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty image stack")]
    EmptyStack,
    #[error("stack is not co-registered: {0}")]
    Misregistered(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegmentationParams {
    /// Bands screened by the cloud mask.
    pub visible_bands: Vec<u16>,
    pub cloud_threshold: f64,
    /// Edge threshold on the temporal-mean gradient; when unset, Otsu's
    /// method over the gradient histogram picks one.
    pub edge_threshold: Option<f64>,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            visible_bands: vec![0],
            cloud_threshold: 0.3,
            edge_threshold: None,
        }
    }
}

/// A labeled field map plus its polygon rings.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSegmentation {
    pub width: u32,
    pub height: u32,
    /// Per-pixel labels; 0 is edge/background.
    pub labels: Vec<u32>,
    pub polygons: Vec<LabeledPolygon>,
    pub component_count: u32,
    /// The edge threshold actually applied.
    pub threshold_used: f64,
}

/// The full segmentation pipeline over a co-registered stack: cloud mask
/// each image, accumulate gradient statistics, threshold the temporal
/// mean, clean the edge map, label components, polygonize. Deterministic
/// for a fixed stack order.
pub fn segment_fields(stack: &[RasterTile], params: &SegmentationParams) -> Result<FieldSegmentation> {
    let Some(first) = stack.first() else {
        return Err(AnalyticsError::EmptyStack);
    };
    let (width, height) = (first.width, first.height);
    let mut stats = EdgeStats::new(width, height);
    for tile in stack {
        if !tile.same_shape(first) || tile.key != first.key {
            return Err(AnalyticsError::Misregistered(format!(
                "tile {} differs from {}",
                tile.key, first.key
            )));
        }
        let mut masked = tile.clone();
        cloud_mask(&mut masked, &params.visible_bands, params.cloud_threshold)?;
        edge_stats_update(&mut stats, &masked)?;
    }
    let (mean, observed) = temporal_mean_gradient(&stats);
    let threshold = params
        .edge_threshold
        .unwrap_or_else(|| otsu_threshold(&mean, &observed));
    let edge_map = extract_edges(&mean, &observed, width, height, threshold);
    let labels = label_components(&edge_map, &observed, width, height)?;
    let polygons = polygonize(&labels, width, height, &first.key, &first.spec)?;
    Ok(FieldSegmentation {
        width,
        height,
        component_count: component_count(&labels),
        labels,
        polygons,
        threshold_used: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::PixelData;
    use crate::tiling::{TileKey, TileSpec};

    fn stack_tile(side: u32, values: Vec<f32>, valid: Vec<bool>) -> RasterTile {
        let spec = TileSpec::new(side, 0, 10.0, 0.0, 0.0).unwrap();
        RasterTile::new(
            TileKey::new(36, 0, 0).unwrap(),
            spec,
            side,
            side,
            1,
            PixelData::F32(values),
            valid,
            0,
            8,
        )
        .unwrap()
    }

    #[test]
    fn constant_image_is_one_component() {
        let tile = stack_tile(16, vec![0.2; 256], vec![true; 256]);
        let seg = segment_fields(&[tile], &SegmentationParams::default()).unwrap();
        assert_eq!(seg.component_count, 1);
        assert!(seg.labels.iter().all(|&l| l == 1));
        assert_eq!(seg.polygons.len(), 1);
    }

    #[test]
    fn empty_stack_errors() {
        assert!(matches!(
            segment_fields(&[], &SegmentationParams::default()),
            Err(AnalyticsError::EmptyStack)
        ));
    }

    /// Edges visible in only one image still segment: clouds elsewhere
    /// hide but do not erase them.
    #[test]
    fn temporal_persistence_recovers_obscured_edges() {
        let side = 16u32;
        let n = (side * side) as usize;
        // The true scene: two halves with a step at column 8.
        let step: Vec<f32> = (0..n)
            .map(|p| if p % side as usize >= 8 { 0.25 } else { 0.05 })
            .collect();
        // Image 0 shows the scene; images 1..4 are fully cloudy (bright).
        let mut stack = vec![stack_tile(side, step, vec![true; n])];
        for _ in 0..3 {
            stack.push(stack_tile(side, vec![0.9; n], vec![true; n]));
        }
        let params = SegmentationParams {
            visible_bands: vec![0],
            cloud_threshold: 0.5,
            edge_threshold: Some(0.1),
        };
        let seg = segment_fields(&stack, &params).unwrap();
        assert_eq!(seg.component_count, 2, "threshold {}", seg.threshold_used);
    }

    #[test]
    fn misregistered_stack_is_rejected() {
        let a = stack_tile(16, vec![0.2; 256], vec![true; 256]);
        let b = stack_tile(8, vec![0.2; 64], vec![true; 64]);
        assert!(matches!(
            segment_fields(&[a, b], &SegmentationParams::default()),
            Err(AnalyticsError::Misregistered(_))
        ));
    }
}
