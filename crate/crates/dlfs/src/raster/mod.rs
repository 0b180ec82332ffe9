//! Geo-referenced raster tiles and the pixel-level scene operations:
//! validity masking, cloud screening, NDVI, valid-data bounds, edge
//! cleaning, and top-of-atmosphere calibration.

pub mod codec;
pub mod rawg;

use crate::tiling::{TileError, TileKey, TileSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn code(&self) -> u8 {
        match self {
            Dtype::U8 => 0,
            Dtype::U16 => 1,
            Dtype::F32 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Dtype> {
        match code {
            0 => Some(Dtype::U8),
            1 => Some(Dtype::U16),
            2 => Some(Dtype::F32),
            _ => None,
        }
    }

    pub fn byte_width(&self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }
}

/// Planar pixel storage: band-major, row-major within each band.
#[derive(Debug, Clone, PartialEq)]
pub enum PixelData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl PixelData {
    pub fn dtype(&self) -> Dtype {
        match self {
            PixelData::U8(_) => Dtype::U8,
            PixelData::U16(_) => Dtype::U16,
            PixelData::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PixelData::U8(v) => v.len(),
            PixelData::U16(v) => v.len(),
            PixelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_f64(&self, index: usize) -> f64 {
        match self {
            PixelData::U8(v) => v[index] as f64,
            PixelData::U16(v) => v[index] as f64,
            PixelData::F32(v) => v[index] as f64,
        }
    }

    pub fn zeros(dtype: Dtype, len: usize) -> PixelData {
        match dtype {
            Dtype::U8 => PixelData::U8(vec![0; len]),
            Dtype::U16 => PixelData::U16(vec![0; len]),
            Dtype::F32 => PixelData::F32(vec![0.0; len]),
        }
    }

    pub fn set_from_f64(&mut self, index: usize, value: f64) {
        match self {
            PixelData::U8(v) => v[index] = value as u8,
            PixelData::U16(v) => v[index] = value as u16,
            PixelData::F32(v) => v[index] = value as f32,
        }
    }

    /// Copy one sample between buffers of the same dtype without any
    /// numeric conversion.
    pub fn copy_sample(&mut self, index: usize, src: &PixelData, src_index: usize) {
        match (self, src) {
            (PixelData::U8(d), PixelData::U8(s)) => d[index] = s[src_index],
            (PixelData::U16(d), PixelData::U16(s)) => d[index] = s[src_index],
            (PixelData::F32(d), PixelData::F32(s)) => d[index] = s[src_index],
            _ => panic!("dtype mismatch in copy_sample"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("band {0} out of range")]
    BadBand(u16),
    #[error("no visible bands configured")]
    NoVisibleBands,
    #[error("sun at or below the horizon: zenith {0} degrees")]
    SunBelowHorizon(f64),
    #[error("invalid tile: {0}")]
    InvalidTile(String),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("payload truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Tile(#[from] TileError),
}

pub type Result<T> = std::result::Result<T, RasterError>;

/// A geo-referenced multi-band pixel block with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterTile {
    pub key: TileKey,
    pub spec: TileSpec,
    pub width: u32,
    pub height: u32,
    pub bands: u16,
    /// Planar band-major samples; length `width * height * bands`.
    pub data: PixelData,
    /// Per-pixel validity; length `width * height`.
    pub valid: Vec<bool>,
    /// Acquisition time, seconds.
    pub timestamp: i64,
    /// Sensor identifier; 0 is reserved for derived products.
    pub sensor: u16,
}

impl RasterTile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        key: TileKey,
        spec: TileSpec,
        width: u32,
        height: u32,
        bands: u16,
        data: PixelData,
        valid: Vec<bool>,
        timestamp: i64,
        sensor: u16,
    ) -> Result<Self> {
        if bands == 0 {
            return Err(RasterError::InvalidTile("zero bands".into()));
        }
        if width == 0 || height == 0 {
            return Err(RasterError::InvalidTile("empty extent".into()));
        }
        let pixels = (width as usize)
            .checked_mul(height as usize)
            .ok_or_else(|| RasterError::InvalidTile("extent overflow".into()))?;
        let samples = pixels
            .checked_mul(bands as usize)
            .ok_or_else(|| RasterError::InvalidTile("sample count overflow".into()))?;
        if data.len() != samples {
            return Err(RasterError::Shape(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                bands
            )));
        }
        if valid.len() != pixels {
            return Err(RasterError::Shape(format!(
                "valid length {} != {}x{}",
                valid.len(),
                width,
                height
            )));
        }
        spec.validate()?;
        Ok(RasterTile {
            key,
            spec,
            width,
            height,
            bands,
            data,
            valid,
            timestamp,
            sensor,
        })
    }

    /// All-invalid tile of the gridded (bordered) size for this spec.
    pub fn empty_gridded(key: TileKey, spec: TileSpec, bands: u16, dtype: Dtype, timestamp: i64, sensor: u16) -> Result<Self> {
        let side = spec.gridded_px();
        let pixels = side as usize * side as usize;
        Self::new(
            key,
            spec,
            side,
            side,
            bands,
            PixelData::zeros(dtype, pixels * bands as usize),
            vec![false; pixels],
            timestamp,
            sensor,
        )
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn pixel_index(&self, row: u32, col: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    #[inline]
    pub fn sample_index(&self, band: u16, row: u32, col: u32) -> usize {
        band as usize * self.pixel_count() + self.pixel_index(row, col)
    }

    pub fn check_band(&self, band: u16) -> Result<()> {
        if band >= self.bands {
            return Err(RasterError::BadBand(band));
        }
        Ok(())
    }

    /// One band promoted to f64, in row-major order.
    pub fn band_f64(&self, band: u16) -> Result<Vec<f64>> {
        self.check_band(band)?;
        let n = self.pixel_count();
        let base = band as usize * n;
        Ok((0..n).map(|i| self.data.get_f64(base + i)).collect())
    }

    pub fn same_shape(&self, other: &RasterTile) -> bool {
        self.width == other.width && self.height == other.height && self.bands == other.bands
    }
}

/// Smallest pixel rectangle containing something; `height`/`width` count
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub row: u32,
    pub col: u32,
    pub height: u32,
    pub width: u32,
}

/// Mark pixels cloudy where every listed band exceeds `threshold`, and
/// remove them from the validity mask. Returns the cloud mask (true =
/// cloudy). Already-invalid pixels are never cloudy.
pub fn cloud_mask(tile: &mut RasterTile, visible_bands: &[u16], threshold: f64) -> Result<Vec<bool>> {
    if visible_bands.is_empty() {
        return Err(RasterError::NoVisibleBands);
    }
    for &b in visible_bands {
        tile.check_band(b)?;
    }
    let n = tile.pixel_count();
    let mut cloudy = vec![false; n];
    for p in 0..n {
        if !tile.valid[p] {
            continue;
        }
        let all_bright = visible_bands
            .iter()
            .all(|&b| tile.data.get_f64(b as usize * n + p) > threshold);
        if all_bright {
            cloudy[p] = true;
            tile.valid[p] = false;
        }
    }
    Ok(cloudy)
}

/// Normalized difference vegetation index: `(nir - red) / (nir + red)`
/// where the pixel is valid and the denominator is positive; invalid
/// elsewhere. Returns `(values, validity)`.
pub fn ndvi(red: &[f64], nir: &[f64], valid: &[bool]) -> Result<(Vec<f64>, Vec<bool>)> {
    if red.len() != nir.len() || red.len() != valid.len() {
        return Err(RasterError::Shape(format!(
            "ndvi inputs disagree: red {}, nir {}, valid {}",
            red.len(),
            nir.len(),
            valid.len()
        )));
    }
    let mut values = vec![0.0; red.len()];
    let mut out_valid = vec![false; red.len()];
    for i in 0..red.len() {
        let sum = nir[i] + red[i];
        if valid[i] && sum > 0.0 {
            values[i] = (nir[i] - red[i]) / sum;
            out_valid[i] = true;
        }
    }
    Ok((values, out_valid))
}

/// Smallest rectangle containing every valid pixel, or `None` when the
/// tile has no valid pixels.
pub fn valid_bounds(tile: &RasterTile) -> Option<PixelRect> {
    valid_bounds_mask(&tile.valid, tile.width, tile.height)
}

/// [`valid_bounds`] over a bare mask.
pub fn valid_bounds_mask(valid: &[bool], width: u32, height: u32) -> Option<PixelRect> {
    let (mut min_r, mut min_c) = (u32::MAX, u32::MAX);
    let (mut max_r, mut max_c) = (0u32, 0u32);
    let mut any = false;
    for r in 0..height {
        for c in 0..width {
            if valid[(r * width + c) as usize] {
                any = true;
                min_r = min_r.min(r);
                min_c = min_c.min(c);
                max_r = max_r.max(r);
                max_c = max_c.max(c);
            }
        }
    }
    any.then(|| PixelRect {
        row: min_r,
        col: min_c,
        height: max_r - min_r + 1,
        width: max_c - min_c + 1,
    })
}

/// Erode the validity mask by `depth` pixels (8-neighborhood); pixel
/// values are untouched. Pixels past the image boundary count as invalid,
/// so a fully valid image loses a `depth`-wide rim.
pub fn clean_edges(mut tile: RasterTile, depth: u32) -> RasterTile {
    let (w, h) = (tile.width as i64, tile.height as i64);
    for _ in 0..depth {
        let old = tile.valid.clone();
        for r in 0..h {
            for c in 0..w {
                let p = (r * w + c) as usize;
                if !old[p] {
                    continue;
                }
                let mut keep = true;
                'scan: for dr in -1..=1i64 {
                    for dc in -1..=1i64 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nr >= h || nc < 0 || nc >= w || !old[(nr * w + nc) as usize] {
                            keep = false;
                            break 'scan;
                        }
                    }
                }
                tile.valid[p] = keep;
            }
        }
        if tile.valid.iter().all(|v| !v) {
            break;
        }
    }
    tile
}

/// Top-of-atmosphere reflectance: `(gain*DN + offset) * d^2 / cos(zenith)`.
pub fn calibrate_toa(
    dn: &[f64],
    gain: f64,
    offset: f64,
    sun_zenith_deg: f64,
    earth_sun_dist_au: f64,
) -> Result<Vec<f64>> {
    if !(sun_zenith_deg.abs() < 90.0) {
        return Err(RasterError::SunBelowHorizon(sun_zenith_deg));
    }
    let cos_z = sun_zenith_deg.to_radians().cos();
    let scale = earth_sun_dist_au * earth_sun_dist_au / cos_z;
    Ok(dn.iter().map(|&v| (gain * v + offset) * scale).collect())
}
