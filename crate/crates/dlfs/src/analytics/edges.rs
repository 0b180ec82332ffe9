//! Temporal edge statistics over a co-registered image stack.
//!
//! Persistent edges (field boundaries) survive averaging over time while
//! transient artifacts (clouds, sensor gaps) wash out. Gradients are
//! forward differences taken only where both participating pixels are
//! valid, so a validity gap contributes exactly zero — a masked stripe
//! cannot manufacture an edge.

use super::{AnalyticsError, Result};
use crate::raster::RasterTile;

/// Per-pixel accumulators: summed gradient magnitude and valid-sample
/// count across the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeStats {
    pub width: u32,
    pub height: u32,
    pub sum_gradient: Vec<f64>,
    pub valid_count: Vec<u32>,
}

impl EdgeStats {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        EdgeStats {
            width,
            height,
            sum_gradient: vec![0.0; n],
            valid_count: vec![0; n],
        }
    }
}

/// Accumulate one image: per band, forward differences `gx`, `gy` where
/// both pixels are valid (zero otherwise), magnitudes summed over bands;
/// the valid count bumps wherever the pixel itself is valid.
pub fn edge_stats_update(stats: &mut EdgeStats, tile: &RasterTile) -> Result<()> {
    if tile.width != stats.width || tile.height != stats.height {
        return Err(AnalyticsError::Shape(format!(
            "stats {}x{} vs tile {}x{}",
            stats.width, stats.height, tile.width, tile.height
        )));
    }
    let (w, h) = (tile.width as usize, tile.height as usize);
    let n = w * h;
    for band in 0..tile.bands {
        let base = band as usize * n;
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                if !tile.valid[p] {
                    continue;
                }
                let here = tile.data.get_f64(base + p);
                let gx = if c + 1 < w && tile.valid[p + 1] {
                    tile.data.get_f64(base + p + 1) - here
                } else {
                    0.0
                };
                let gy = if r + 1 < h && tile.valid[p + w] {
                    tile.data.get_f64(base + p + w) - here
                } else {
                    0.0
                };
                stats.sum_gradient[p] += gx.hypot(gy);
            }
        }
    }
    for p in 0..n {
        if tile.valid[p] {
            stats.valid_count[p] += 1;
        }
    }
    Ok(())
}

/// Pixelwise `sum / count`; pixels never observed are invalid.
pub fn temporal_mean_gradient(stats: &EdgeStats) -> (Vec<f64>, Vec<bool>) {
    let mut mean = vec![0.0; stats.sum_gradient.len()];
    let mut valid = vec![false; stats.sum_gradient.len()];
    for p in 0..mean.len() {
        if stats.valid_count[p] > 0 {
            mean[p] = stats.sum_gradient[p] / stats.valid_count[p] as f64;
            valid[p] = true;
        }
    }
    (mean, valid)
}

/// Otsu's threshold over the valid values of a band: the 256-bin split
/// maximizing inter-class variance. Returns a value above the maximum when
/// the histogram is degenerate (a constant image has no edges).
pub fn otsu_threshold(values: &[f64], valid: &[bool]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, ok) in values.iter().zip(valid) {
        if *ok {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !(hi > lo) {
        return if hi.is_finite() { hi + 1.0 } else { 1.0 };
    }
    const BINS: usize = 256;
    let scale = BINS as f64 / (hi - lo);
    let mut hist = [0u64; BINS];
    let mut total = 0u64;
    for (v, ok) in values.iter().zip(valid) {
        if *ok {
            let bin = (((v - lo) * scale) as usize).min(BINS - 1);
            hist[bin] += 1;
            total += 1;
        }
    }
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut weight_bg = 0u64;
    let mut sum_bg = 0.0;
    let mut best = (0.0, 0usize);
    for bin in 0..BINS - 1 {
        weight_bg += hist[bin];
        if weight_bg == 0 {
            continue;
        }
        let weight_fg = total - weight_bg;
        if weight_fg == 0 {
            break;
        }
        sum_bg += bin as f64 * hist[bin] as f64;
        let mean_bg = sum_bg / weight_bg as f64;
        let mean_fg = (sum_all - sum_bg) / weight_fg as f64;
        let between = weight_bg as f64 * weight_fg as f64 * (mean_bg - mean_fg).powi(2);
        if between > best.0 {
            best = (between, bin);
        }
    }
    lo + (best.1 as f64 + 1.0) / scale
}

/// Threshold the mean gradient into a binary edge map, then clean it:
/// morphological closing with a 3x3 cross, then removal of isolated
/// single edge pixels.
pub fn extract_edges(mean: &[f64], valid: &[bool], width: u32, height: u32, threshold: f64) -> Vec<bool> {
    let (w, h) = (width as i64, height as i64);
    let n = (w * h) as usize;
    let mut edges: Vec<bool> = (0..n).map(|p| valid[p] && mean[p] >= threshold).collect();

    // Dilate (cross): anything beyond the image does not dilate inward.
    let at = |map: &[bool], r: i64, c: i64, outside: bool| -> bool {
        if r < 0 || r >= h || c < 0 || c >= w {
            outside
        } else {
            map[(r * w + c) as usize]
        }
    };
    let mut dilated = vec![false; n];
    for r in 0..h {
        for c in 0..w {
            dilated[(r * w + c) as usize] = at(&edges, r, c, false)
                || at(&edges, r - 1, c, false)
                || at(&edges, r + 1, c, false)
                || at(&edges, r, c - 1, false)
                || at(&edges, r, c + 1, false);
        }
    }
    // Erode (cross): the image boundary does not erode, so lines touching
    // the edge of the tile keep their endpoints.
    for r in 0..h {
        for c in 0..w {
            edges[(r * w + c) as usize] = at(&dilated, r, c, true)
                && at(&dilated, r - 1, c, true)
                && at(&dilated, r + 1, c, true)
                && at(&dilated, r, c - 1, true)
                && at(&dilated, r, c + 1, true);
        }
    }
    // Drop isolated single pixels.
    let snapshot = edges.clone();
    for r in 0..h {
        for c in 0..w {
            let p = (r * w + c) as usize;
            if !snapshot[p] {
                continue;
            }
            let mut neighbors = false;
            'scan: for dr in -1..=1 {
                for dc in -1..=1 {
                    if (dr != 0 || dc != 0) && at(&snapshot, r + dr, c + dc, false) {
                        neighbors = true;
                        break 'scan;
                    }
                }
            }
            if !neighbors {
                edges[p] = false;
            }
        }
    }
    edges
}
