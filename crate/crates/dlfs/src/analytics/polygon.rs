//! Label rasters to polygon rings and back.
//!
//! Boundaries are traced along pixel edges with the region kept on the
//! left in map orientation, so outer rings come out counter-clockwise and
//! holes clockwise (in easting/northing). Collinear runs collapse, so a
//! rectangular region is exactly four vertices. Rasterizing the rings back
//! with even-odd parity at pixel centers reproduces the label map, which
//! is the correctness oracle for both directions.

use std::collections::BTreeMap;

use super::{AnalyticsError, Result};
use crate::tiling::{tile_bounds, TileKey, TileSpec};

/// Rings for one labeled region, in easting/northing meters. The first
/// ring is the outer boundary (counter-clockwise); any further rings are
/// holes (clockwise). Rings are open: the closing vertex is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPolygon {
    pub label: u32,
    pub rings: Vec<Vec<(f64, f64)>>,
}

/// Trace every label (except background 0) into pixel-boundary rings.
pub fn polygonize(
    labels: &[u32],
    width: u32,
    height: u32,
    key: &TileKey,
    spec: &TileSpec,
) -> Result<Vec<LabeledPolygon>> {
    if labels.len() != width as usize * height as usize {
        return Err(AnalyticsError::Shape(format!(
            "labels length {} != {}x{}",
            labels.len(),
            width,
            height
        )));
    }
    let bordered = tile_bounds(key, spec, true);
    let res = spec.resolution_m;
    let to_geo = |x: i64, y: i64| -> (f64, f64) {
        (
            bordered.min_easting + x as f64 * res,
            bordered.max_northing - y as f64 * res,
        )
    };

    let mut out = Vec::new();
    let mut sorted_labels: Vec<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
    sorted_labels.sort_unstable();
    sorted_labels.dedup();

    for target in sorted_labels {
        let pixel_rings = trace_label(labels, width as i64, height as i64, target);
        let mut rings_geo: Vec<(i64, Vec<(f64, f64)>)> = pixel_rings
            .into_iter()
            .map(|ring| {
                let area2 = -shoelace2(&ring); // map orientation flips the pixel y-axis
                (area2, ring.into_iter().map(|(x, y)| to_geo(x, y)).collect())
            })
            .collect();
        // Outer ring (positive area in map orientation) first, then holes.
        rings_geo.sort_by_key(|(area2, _)| std::cmp::Reverse(*area2));
        debug_assert!(rings_geo.first().is_some_and(|(a, _)| *a > 0));
        out.push(LabeledPolygon {
            label: target,
            rings: rings_geo.into_iter().map(|(_, ring)| ring).collect(),
        });
    }
    Ok(out)
}

/// Twice the signed area of a ring in pixel coordinates.
fn shoelace2(ring: &[(i64, i64)]) -> i64 {
    let mut acc = 0i64;
    for i in 0..ring.len() {
        let (x1, y1) = ring[i];
        let (x2, y2) = ring[(i + 1) % ring.len()];
        acc += x1 * y2 - x2 * y1;
    }
    acc
}

/// All boundary rings of one label, as closed chains of pixel corners
/// with collinear runs merged.
fn trace_label(labels: &[u32], w: i64, h: i64, target: u32) -> Vec<Vec<(i64, i64)>> {
    let at = |r: i64, c: i64| -> bool {
        r >= 0 && r < h && c >= 0 && c < w && labels[(r * w + c) as usize] == target
    };

    // Directed boundary edges, region on the left in map orientation.
    // Pixel-corner coordinates: x = col, y = row (y grows southward).
    let mut edges: Vec<((i64, i64), (i64, i64))> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !at(r, c) {
                continue;
            }
            if !at(r - 1, c) {
                edges.push(((c + 1, r), (c, r))); // north side, walked east to west
            }
            if !at(r + 1, c) {
                edges.push(((c, r + 1), (c + 1, r + 1))); // south side, west to east
            }
            if !at(r, c - 1) {
                edges.push(((c, r), (c, r + 1))); // west side, north to south
            }
            if !at(r, c + 1) {
                edges.push(((c + 1, r + 1), (c + 1, r))); // east side, south to north
            }
        }
    }

    let mut by_start: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (idx, (start, _)) in edges.iter().enumerate() {
        by_start.entry(*start).or_default().push(idx);
    }

    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for first in 0..edges.len() {
        if used[first] {
            continue;
        }
        let mut ring: Vec<(i64, i64)> = Vec::new();
        let origin = edges[first].0;
        let mut current = first;
        loop {
            used[current] = true;
            let (start, end) = edges[current];
            ring.push(start);
            if end == origin {
                break;
            }
            let dir_in = (end.0 - start.0, end.1 - start.1);
            let candidates = by_start.get(&end).expect("boundary chains are closed");
            // At a saddle corner two continuations exist; take the
            // sharpest left turn in map orientation (right turn in pixel
            // coordinates, where y is flipped) so the ring hugs the region
            // without self-crossing.
            let next = candidates
                .iter()
                .copied()
                .filter(|&e| !used[e])
                .min_by_key(|&e| {
                    let (s, t) = edges[e];
                    let dir_out = (t.0 - s.0, t.1 - s.1);
                    
                    dir_in.0 * dir_out.1 - dir_in.1 * dir_out.0 // -1 right (left in map), 0 straight, 1 left
                })
                .expect("boundary chains are closed");
            current = next;
        }
        rings.push(merge_collinear(ring));
    }
    rings
}

/// Drop vertices in the middle of straight runs, circularly.
fn merge_collinear(ring: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    let n = ring.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = ring[(i + n - 1) % n];
        let here = ring[i];
        let next = ring[(i + 1) % n];
        let d1 = (here.0 - prev.0, here.1 - prev.1);
        let d2 = (next.0 - here.0, next.1 - here.1);
        if d1.0 * d2.1 - d1.1 * d2.0 != 0 {
            out.push(here);
        }
    }
    out
}

/// Paint polygons back onto a label raster by even-odd parity at pixel
/// centers. The exact inverse of [`polygonize`] on its own output.
pub fn rasterize_polygons(
    polygons: &[LabeledPolygon],
    width: u32,
    height: u32,
    key: &TileKey,
    spec: &TileSpec,
) -> Vec<u32> {
    let bordered = tile_bounds(key, spec, true);
    let res = spec.resolution_m;
    let mut out = vec![0u32; width as usize * height as usize];
    for poly in polygons {
        // Rings back to pixel coordinates; vertices are mathematically
        // integers, so round away any float residue.
        let rings_px: Vec<Vec<(i64, i64)>> = poly
            .rings
            .iter()
            .map(|ring| {
                ring.iter()
                    .map(|&(e, n)| {
                        (
                            ((e - bordered.min_easting) / res).round() as i64,
                            ((bordered.max_northing - n) / res).round() as i64,
                        )
                    })
                    .collect()
            })
            .collect();
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for ring in &rings_px {
            for &(x, y) in ring {
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
        for r in min_y.max(0)..max_y.min(height as i64) {
            for c in min_x.max(0)..max_x.min(width as i64) {
                // Ray cast east from the pixel center; only vertical edges
                // at half-integer-free x > center can cross.
                let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
                let mut crossings = 0u32;
                for ring in &rings_px {
                    for i in 0..ring.len() {
                        let (x1, y1) = ring[i];
                        let (x2, y2) = ring[(i + 1) % ring.len()];
                        if x1 == x2 && x1 as f64 > px {
                            let (lo, hi) = (y1.min(y2) as f64, y1.max(y2) as f64);
                            if lo < py && py < hi {
                                crossings += 1;
                            }
                        }
                    }
                }
                if crossings % 2 == 1 {
                    out[(r * width as i64 + c) as usize] = poly.label;
                }
            }
        }
    }
    out
}
