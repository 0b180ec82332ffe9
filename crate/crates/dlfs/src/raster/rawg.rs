//! RAWG: a minimal headered raw-grid format for source scenes.
//!
//! Used for test fixtures and synthetic inputs; real satellite container
//! formats are out of scope. Little-endian: magic `RAWG`, version u16,
//! width u32, height u32, bands u16, dtype u8, flags u8 (bit 0: validity
//! bitmap), west-edge easting f64, north-edge northing f64, resolution
//! f64, then planar band data and the optional row-major MSB-first
//! validity bitmap. No checksum; the durable tile format is DLT1.

use super::{Dtype, PixelData, RasterError, Result};

const MAGIC: &[u8; 4] = b"RAWG";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 42;
const FLAG_VALIDITY: u8 = 0x01;

/// A full scene raster: like a tile but free-form, georeferenced by its
/// north-west corner instead of a grid key.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRaster {
    pub width: u32,
    pub height: u32,
    pub bands: u16,
    pub data: PixelData,
    pub valid: Vec<bool>,
    /// Easting of the scene's west edge, meters.
    pub west_easting_m: f64,
    /// Northing of the scene's north edge, meters.
    pub north_northing_m: f64,
    pub resolution_m: f64,
}

impl SceneRaster {
    pub fn validate(&self) -> Result<()> {
        let pixels = self.width as usize * self.height as usize;
        if self.bands == 0 || self.width == 0 || self.height == 0 {
            return Err(RasterError::InvalidTile("empty scene".into()));
        }
        if self.data.len() != pixels * self.bands as usize {
            return Err(RasterError::Shape(format!(
                "scene data length {} != {}x{}x{}",
                self.data.len(),
                self.width,
                self.height,
                self.bands
            )));
        }
        if self.valid.len() != pixels {
            return Err(RasterError::Shape("scene validity length".into()));
        }
        if !(self.resolution_m > 0.0) {
            return Err(RasterError::InvalidTile("non-positive resolution".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

pub fn encode_scene(scene: &SceneRaster) -> Result<Vec<u8>> {
    scene.validate()?;
    let pixels = scene.pixel_count();
    let all_valid = scene.valid.iter().all(|&v| v);
    let mut out = Vec::with_capacity(HEADER_LEN + scene.data.len() * scene.data.dtype().byte_width());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&scene.width.to_le_bytes());
    out.extend_from_slice(&scene.height.to_le_bytes());
    out.extend_from_slice(&scene.bands.to_le_bytes());
    out.push(scene.data.dtype().code());
    out.push(if all_valid { 0 } else { FLAG_VALIDITY });
    out.extend_from_slice(&scene.west_easting_m.to_le_bytes());
    out.extend_from_slice(&scene.north_northing_m.to_le_bytes());
    out.extend_from_slice(&scene.resolution_m.to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);
    match &scene.data {
        PixelData::U8(v) => out.extend_from_slice(v),
        PixelData::U16(v) => {
            for s in v {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        PixelData::F32(v) => {
            for s in v {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    if !all_valid {
        let mut bitmap = vec![0u8; pixels.div_ceil(8)];
        for (p, &v) in scene.valid.iter().enumerate() {
            if v {
                bitmap[p / 8] |= 0x80 >> (p % 8);
            }
        }
        out.extend_from_slice(&bitmap);
    }
    Ok(out)
}

pub fn decode_scene(bytes: &[u8]) -> Result<SceneRaster> {
    if bytes.len() < HEADER_LEN {
        return Err(RasterError::Truncated {
            need: HEADER_LEN,
            have: bytes.len(),
        });
    }
    if &bytes[0..4] != MAGIC {
        return Err(RasterError::BadMagic);
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(RasterError::UnsupportedVersion(version));
    }
    let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
    let bands = u16::from_le_bytes(bytes[14..16].try_into().unwrap());
    let dtype = Dtype::from_code(bytes[16]).ok_or_else(|| RasterError::Malformed("unknown dtype".into()))?;
    let flags = bytes[17];
    let west = f64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let north = f64::from_le_bytes(bytes[26..34].try_into().unwrap());
    let resolution = f64::from_le_bytes(bytes[34..42].try_into().unwrap());

    let pixels = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| RasterError::Malformed("extent overflow".into()))?;
    let samples = pixels * bands as usize;
    let data_len = samples * dtype.byte_width();
    let bitmap_len = if flags & FLAG_VALIDITY != 0 { pixels.div_ceil(8) } else { 0 };
    let need = HEADER_LEN + data_len + bitmap_len;
    if bytes.len() != need {
        return Err(RasterError::Truncated {
            need,
            have: bytes.len(),
        });
    }

    let raw = &bytes[HEADER_LEN..HEADER_LEN + data_len];
    let data = match dtype {
        Dtype::U8 => PixelData::U8(raw.to_vec()),
        Dtype::U16 => PixelData::U16(
            raw.chunks_exact(2)
                .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        Dtype::F32 => PixelData::F32(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    let valid = if bitmap_len > 0 {
        let bitmap = &bytes[HEADER_LEN + data_len..];
        (0..pixels)
            .map(|p| bitmap[p / 8] & (0x80 >> (p % 8)) != 0)
            .collect()
    } else {
        vec![true; pixels]
    };

    let scene = SceneRaster {
        width,
        height,
        bands,
        data,
        valid,
        west_easting_m: west,
        north_northing_m: north,
        resolution_m: resolution,
    };
    scene.validate()?;
    Ok(scene)
}
