//! Weighted temporal compositing: a per-pixel weighted average over a
//! stack, with zero weight for cloudy or invalid samples and extra weight
//! for vegetated ones.

use super::{AnalyticsError, Result};
use crate::raster::{cloud_mask, ndvi, PixelData, RasterTile};

/// Additive weight floor for any usable sample.
pub const DEFAULT_WEIGHT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CompositeParams {
    /// Bands screened by the cloud mask.
    pub visible_bands: Vec<u16>,
    /// Reflectance above which all visible bands reading bright means cloud.
    pub cloud_threshold: f64,
    pub red_band: u16,
    pub nir_band: u16,
    /// Weight floor epsilon.
    pub weight_epsilon: f64,
}

impl Default for CompositeParams {
    fn default() -> Self {
        CompositeParams {
            visible_bands: vec![0],
            cloud_threshold: 0.3,
            red_band: 0,
            nir_band: 1,
            weight_epsilon: DEFAULT_WEIGHT_EPSILON,
        }
    }
}

/// Per-pixel weights: 0 where cloudy or invalid, otherwise
/// `epsilon + max(ndvi, 0)`.
pub fn composite_weights(
    valid: &[bool],
    cloudy: &[bool],
    ndvi_values: &[f64],
    ndvi_valid: &[bool],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let n = valid.len();
    if cloudy.len() != n || ndvi_values.len() != n || ndvi_valid.len() != n {
        return Err(AnalyticsError::Shape("weight inputs disagree".into()));
    }
    Ok((0..n)
        .map(|p| {
            if !valid[p] || cloudy[p] {
                0.0
            } else {
                let verdancy = if ndvi_valid[p] { ndvi_values[p].max(0.0) } else { 0.0 };
                epsilon + verdancy
            }
        })
        .collect())
}

/// Running weighted sums, mergeable across partial reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeAccumulator {
    pub width: u32,
    pub height: u32,
    pub bands: u16,
    /// Per band then per pixel: sum of `w * value`.
    pub weighted_sum: Vec<f64>,
    /// Per pixel: sum of weights.
    pub weight_sum: Vec<f64>,
}

impl CompositeAccumulator {
    pub fn new(width: u32, height: u32, bands: u16) -> Self {
        let pixels = width as usize * height as usize;
        CompositeAccumulator {
            width,
            height,
            bands,
            weighted_sum: vec![0.0; pixels * bands as usize],
            weight_sum: vec![0.0; pixels],
        }
    }

    pub fn update(&mut self, tile: &RasterTile, weights: &[f64]) -> Result<()> {
        if tile.width != self.width || tile.height != self.height || tile.bands != self.bands {
            return Err(AnalyticsError::Shape(format!(
                "accumulator {}x{}x{} vs tile {}x{}x{}",
                self.width, self.height, self.bands, tile.width, tile.height, tile.bands
            )));
        }
        let pixels = tile.pixel_count();
        if weights.len() != pixels {
            return Err(AnalyticsError::Shape("weights length".into()));
        }
        for p in 0..pixels {
            let w = weights[p];
            if w <= 0.0 {
                continue;
            }
            self.weight_sum[p] += w;
            for b in 0..self.bands as usize {
                self.weighted_sum[b * pixels + p] += w * tile.data.get_f64(b * pixels + p);
            }
        }
        Ok(())
    }

    /// Fold another accumulator in; addition is associative, so partial
    /// reductions may run anywhere and merge in any order.
    pub fn merge(&mut self, other: &CompositeAccumulator) -> Result<()> {
        if (other.width, other.height, other.bands) != (self.width, self.height, self.bands) {
            return Err(AnalyticsError::Shape("merging mismatched accumulators".into()));
        }
        for (a, b) in self.weighted_sum.iter_mut().zip(&other.weighted_sum) {
            *a += b;
        }
        for (a, b) in self.weight_sum.iter_mut().zip(&other.weight_sum) {
            *a += b;
        }
        Ok(())
    }

    /// The weighted average as an f32 tile; pixels that never received
    /// weight are invalid. Georeferencing is copied from `like`.
    pub fn finalize(&self, like: &RasterTile) -> Result<RasterTile> {
        if like.width != self.width || like.height != self.height || like.bands != self.bands {
            return Err(AnalyticsError::Shape("finalize template mismatch".into()));
        }
        let pixels = self.width as usize * self.height as usize;
        let mut data = vec![0.0f32; pixels * self.bands as usize];
        let mut valid = vec![false; pixels];
        for p in 0..pixels {
            if self.weight_sum[p] > 0.0 {
                valid[p] = true;
                for b in 0..self.bands as usize {
                    data[b * pixels + p] =
                        (self.weighted_sum[b * pixels + p] / self.weight_sum[p]) as f32;
                }
            }
        }
        Ok(RasterTile::new(
            like.key,
            like.spec,
            self.width,
            self.height,
            self.bands,
            PixelData::F32(data),
            valid,
            like.timestamp,
            0, // sensor 0: derived product
        )?)
    }
}

/// One-shot pipeline: cloud-mask each tile, weight by verdancy, average.
/// The output's timestamp is the newest input's.
pub fn composite_reduce(tiles: &[RasterTile], params: &CompositeParams) -> Result<RasterTile> {
    let Some(first) = tiles.first() else {
        return Err(AnalyticsError::EmptyStack);
    };
    let mut acc = CompositeAccumulator::new(first.width, first.height, first.bands);
    let mut template = first.clone();
    template.timestamp = tiles.iter().map(|t| t.timestamp).max().unwrap_or(0);
    for tile in tiles {
        if !tile.same_shape(first) || tile.key != first.key {
            return Err(AnalyticsError::Misregistered(format!(
                "tile {} differs from {}",
                tile.key, first.key
            )));
        }
        let mut masked = tile.clone();
        let cloudy = cloud_mask(&mut masked, &params.visible_bands, params.cloud_threshold)?;
        let red = masked.band_f64(params.red_band)?;
        let nir = masked.band_f64(params.nir_band)?;
        let (ndvi_values, ndvi_ok) = ndvi(&red, &nir, &masked.valid)?;
        let weights = composite_weights(
            &masked.valid,
            &cloudy,
            &ndvi_values,
            &ndvi_ok,
            params.weight_epsilon,
        )?;
        acc.update(&masked, &weights)?;
    }
    acc.finalize(&template)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::{TileKey, TileSpec};

    fn tile_with(values: Vec<f32>, valid: Vec<bool>, bands: u16, side: u32) -> RasterTile {
        let spec = TileSpec::new(side * 2, 0, 10.0, 0.0, 0.0).unwrap();
        RasterTile::new(
            TileKey::new(36, 0, 0).unwrap(),
            spec,
            side,
            side,
            bands,
            PixelData::F32(values),
            valid,
            100,
            8,
        )
        .unwrap()
    }

    #[test]
    fn weight_rules() {
        let valid = vec![true, true, true, false];
        let cloudy = vec![true, false, false, false];
        let ndvi_v = vec![0.8, -0.2, 0.8, 0.8];
        let ndvi_ok = vec![true, true, true, true];
        let w = composite_weights(&valid, &cloudy, &ndvi_v, &ndvi_ok, 0.01).unwrap();
        assert_eq!(w[0], 0.0); // cloudy
        assert_eq!(w[1], 0.01); // negative verdancy clamps to the floor
        assert!((w[2] - 0.81).abs() < 1e-15);
        assert_eq!(w[3], 0.0); // invalid
    }

    #[test]
    fn single_cloud_free_input_is_reproduced_exactly() {
        let n = 16;
        let values: Vec<f32> = (0..n * 2).map(|i| 0.001 + i as f32 * 0.013).collect();
        let tile = tile_with(values.clone(), vec![true; n], 2, 4);
        let out = composite_reduce(std::slice::from_ref(&tile), &CompositeParams::default()).unwrap();
        let PixelData::F32(got) = &out.data else { panic!() };
        assert_eq!(got, &values);
        assert!(out.valid.iter().all(|&v| v));
        assert_eq!(out.sensor, 0);
    }

    #[test]
    fn weighted_average_arithmetic() {
        // Values 10 and 20 with weights 1 and 3 average to 17.5.
        let mut acc = CompositeAccumulator::new(1, 1, 1);
        let a = tile_with(vec![10.0], vec![true], 1, 1);
        let b = tile_with(vec![20.0], vec![true], 1, 1);
        acc.update(&a, &[1.0]).unwrap();
        acc.update(&b, &[3.0]).unwrap();
        let out = acc.finalize(&a).unwrap();
        assert_eq!(out.data.get_f64(0), 17.5);
    }

    #[test]
    fn cloudy_pixel_excluded_from_average() {
        // Pixel cloudy in image A (bright), clear in B: the output is B.
        let params = CompositeParams {
            visible_bands: vec![0],
            cloud_threshold: 0.3,
            red_band: 0,
            nir_band: 1,
            weight_epsilon: 0.01,
        };
        let a = tile_with(vec![0.9, 0.9, 0.9, 0.9, 0.5, 0.5, 0.5, 0.5], vec![true; 4], 2, 2);
        let b = tile_with(vec![0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2, 0.2], vec![true; 4], 2, 2);
        let out = composite_reduce(&[a, b.clone()], &params).unwrap();
        for p in 0..4 {
            assert!((out.data.get_f64(p) - b.data.get_f64(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn no_weight_anywhere_is_invalid() {
        let mut tile = tile_with(vec![0.5; 8], vec![false; 4], 2, 2);
        tile.valid = vec![false; 4];
        let out = composite_reduce(&[tile], &CompositeParams::default()).unwrap();
        assert!(out.valid.iter().all(|&v| !v));
    }

    #[test]
    fn merge_equals_sequential_update() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(61);
        let tiles: Vec<RasterTile> = (0..6)
            .map(|_| {
                let values: Vec<f32> = (0..32).map(|_| rng.gen_range(0.0f32..1.0)).collect();
                tile_with(values, vec![true; 16], 2, 4)
            })
            .collect();
        let weights: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..16).map(|_| rng.gen_range(0.0..2.0)).collect())
            .collect();

        let mut whole = CompositeAccumulator::new(4, 4, 2);
        for (t, w) in tiles.iter().zip(&weights) {
            whole.update(t, w).unwrap();
        }
        let mut left = CompositeAccumulator::new(4, 4, 2);
        let mut right = CompositeAccumulator::new(4, 4, 2);
        for (i, (t, w)) in tiles.iter().zip(&weights).enumerate() {
            if i % 2 == 0 {
                left.update(t, w).unwrap();
            } else {
                right.update(t, w).unwrap();
            }
        }
        left.merge(&right).unwrap();
        let a = whole.finalize(&tiles[0]).unwrap();
        let b = left.finalize(&tiles[0]).unwrap();
        for p in 0..16 {
            for band in 0..2u16 {
                let i = band as usize * 16 + p;
                assert!((a.data.get_f64(i) - b.data.get_f64(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_stays_within_input_hull() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(62);
        for _ in 0..100 {
            let depth = rng.gen_range(1..6);
            let tiles: Vec<RasterTile> = (0..depth)
                .map(|_| {
                    let values: Vec<f32> = (0..8).map(|_| rng.gen_range(0.0f32..1.0)).collect();
                    let valid: Vec<bool> = (0..4).map(|_| rng.gen_bool(0.8)).collect();
                    tile_with(values, valid, 2, 2)
                })
                .collect();
            let out = composite_reduce(&tiles, &CompositeParams::default()).unwrap();
            for p in 0..4 {
                if !out.valid[p] {
                    continue;
                }
                for band in 0..2usize {
                    let i = band * 4 + p;
                    // Contributors: valid, non-cloudy pixels of the inputs.
                    let mut lo = f32::INFINITY;
                    let mut hi = f32::NEG_INFINITY;
                    for t in &tiles {
                        let mut masked = t.clone();
                        cloud_mask(&mut masked, &[0], 0.3).unwrap();
                        if masked.valid[p] {
                            let v = masked.data.get_f64(i) as f32;
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    let got = out.data.get_f64(i) as f32;
                    assert!(got >= lo && got <= hi, "pixel {p} band {band}: {got} not in [{lo}, {hi}]");
                }
            }
        }
    }
}
