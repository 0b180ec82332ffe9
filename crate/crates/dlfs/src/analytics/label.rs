//! Connected-component labeling of non-edge pixels, and display colors.

use rand::{Rng, SeedableRng};

use super::{AnalyticsError, Result};

/// Label 4-connected components of valid non-edge pixels `1..=N` in
/// first-touch row-major order; edge and invalid pixels get label 0.
pub fn label_components(edges: &[bool], valid: &[bool], width: u32, height: u32) -> Result<Vec<u32>> {
    let n = width as usize * height as usize;
    if edges.len() != n || valid.len() != n {
        return Err(AnalyticsError::Shape(format!(
            "labeling inputs: edges {}, valid {}, extent {}",
            edges.len(),
            valid.len(),
            n
        )));
    }
    let (w, h) = (width as usize, height as usize);
    let mut labels = vec![0u32; n];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] != 0 || edges[start] || !valid[start] {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (r, c) = (p / w, p % w);
            let mut visit = |q: usize| {
                if labels[q] == 0 && !edges[q] && valid[q] {
                    labels[q] = next;
                    stack.push(q);
                }
            };
            if r > 0 {
                visit(p - w);
            }
            if r + 1 < h {
                visit(p + w);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < w {
                visit(p + 1);
            }
        }
    }
    Ok(labels)
}

pub fn component_count(labels: &[u32]) -> u32 {
    labels.iter().copied().max().unwrap_or(0)
}

/// Interleaved RGB8 with one random color per label, deterministic for a
/// fixed seed. Label 0 is black; distinct labels get distinct colors
/// (collisions redraw).
pub fn colorize(labels: &[u32], seed: u64) -> Vec<u8> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let count = component_count(labels);
    let mut palette: Vec<[u8; 3]> = vec![[0, 0, 0]];
    let mut used = std::collections::HashSet::new();
    used.insert([0u8, 0, 0]);
    for _ in 0..count {
        loop {
            let color = [rng.gen(), rng.gen(), rng.gen()];
            if used.insert(color) {
                palette.push(color);
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(labels.len() * 3);
    for &l in labels {
        out.extend_from_slice(&palette[l as usize]);
    }
    out
}
