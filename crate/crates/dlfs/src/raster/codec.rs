//! DLT1: the lossless on-disk tile format.
//!
//! Little-endian layout:
//!
//! | offset | field                                    |
//! |--------|------------------------------------------|
//! | 0      | magic `DLT1`                             |
//! | 4      | version `u16` (= 1)                      |
//! | 6      | width `u32`                              |
//! | 10     | height `u32`                             |
//! | 14     | bands `u16`                              |
//! | 16     | dtype `u8` (0 = u8, 1 = u16, 2 = f32)    |
//! | 17     | flags `u8` (bit 0: validity bitmap)      |
//! | 18     | zone `i16`                               |
//! | 20     | tile_i `i32`                             |
//! | 24     | tile_j `i32`                             |
//! | 28     | resolution_m `f64`                       |
//! | 36     | origin_easting `f64`                     |
//! | 44     | origin_northing `f64`                    |
//! | 52     | timestamp `i64`                          |
//! | 60     | sensor `u16`                             |
//! | 62     | border_px `u16`, tile_px `u32`           |
//! | 68     | planar band data, row-major within band  |
//! |        | validity bitmap, row-major, MSB-first    |
//! |        | (present iff flags bit 0)                |
//! | end-8  | FNV-1a 64 checksum of all prior bytes    |
//!
//! Encoding is deterministic: equal tiles produce equal bytes. The
//! validity bitmap is emitted only when some pixel is invalid.

use super::{Dtype, PixelData, RasterError, RasterTile, Result};
use crate::fnv;
use crate::tiling::{TileKey, TileSpec};

const MAGIC: &[u8; 4] = b"DLT1";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 68;
const FLAG_VALIDITY: u8 = 0x01;

pub fn encode_tile(tile: &RasterTile) -> Result<Vec<u8>> {
    if tile.bands == 0 || tile.data.is_empty() {
        return Err(RasterError::InvalidTile("nothing to encode".into()));
    }
    let pixels = tile.pixel_count();
    let data_len = pixels * tile.bands as usize * tile.data.dtype().byte_width();
    let all_valid = tile.valid.iter().all(|&v| v);
    let bitmap_len = if all_valid { 0 } else { pixels.div_ceil(8) };
    let mut out = Vec::with_capacity(HEADER_LEN + data_len + bitmap_len + 8);

    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&tile.width.to_le_bytes());
    out.extend_from_slice(&tile.height.to_le_bytes());
    out.extend_from_slice(&tile.bands.to_le_bytes());
    out.push(tile.data.dtype().code());
    out.push(if all_valid { 0 } else { FLAG_VALIDITY });
    out.extend_from_slice(&(tile.key.zone as i16).to_le_bytes());
    out.extend_from_slice(&tile.key.i.to_le_bytes());
    out.extend_from_slice(&tile.key.j.to_le_bytes());
    out.extend_from_slice(&tile.spec.resolution_m.to_le_bytes());
    out.extend_from_slice(&tile.spec.origin_easting_m.to_le_bytes());
    out.extend_from_slice(&tile.spec.origin_northing_m.to_le_bytes());
    out.extend_from_slice(&tile.timestamp.to_le_bytes());
    out.extend_from_slice(&tile.sensor.to_le_bytes());
    out.extend_from_slice(&(tile.spec.border_px as u16).to_le_bytes());
    out.extend_from_slice(&tile.spec.tile_px.to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);

    match &tile.data {
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
        let mut bitmap = vec![0u8; bitmap_len];
        for (p, &v) in tile.valid.iter().enumerate() {
            if v {
                bitmap[p / 8] |= 0x80 >> (p % 8);
            }
        }
        out.extend_from_slice(&bitmap);
    }

    let checksum = fnv::fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(RasterError::Truncated {
                need: self.at + n,
                have: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn i16(&mut self) -> Result<i16> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn decode_tile(bytes: &[u8]) -> Result<RasterTile> {
    if bytes.len() < HEADER_LEN + 8 {
        return Err(RasterError::Truncated {
            need: HEADER_LEN + 8,
            have: bytes.len(),
        });
    }
    // Checksum first: corruption anywhere must be caught before any field
    // is trusted.
    let body = &bytes[..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let computed = fnv::fnv1a64(body);
    if stored != computed {
        return Err(RasterError::Checksum { stored, computed });
    }

    let mut cur = Cursor { bytes: body, at: 0 };
    if cur.take(4)? != MAGIC {
        return Err(RasterError::BadMagic);
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(RasterError::UnsupportedVersion(version));
    }
    let width = cur.u32()?;
    let height = cur.u32()?;
    let bands = cur.u16()?;
    let dtype = Dtype::from_code(cur.u8()?)
        .ok_or_else(|| RasterError::Malformed("unknown dtype".into()))?;
    let flags = cur.u8()?;
    let zone = cur.i16()?;
    let tile_i = cur.i32()?;
    let tile_j = cur.i32()?;
    let resolution_m = cur.f64()?;
    let origin_easting_m = cur.f64()?;
    let origin_northing_m = cur.f64()?;
    let timestamp = cur.i64()?;
    let sensor = cur.u16()?;
    let border_px = cur.u16()? as u32;
    let tile_px = cur.u32()?;

    if !(1..=60).contains(&zone) {
        return Err(RasterError::Malformed(format!("zone {zone} out of range")));
    }
    let key = TileKey::new(zone as u8, tile_i, tile_j)?;
    let spec = TileSpec::new(tile_px, border_px, resolution_m, origin_easting_m, origin_northing_m)?;

    let pixels = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| RasterError::Malformed("extent overflow".into()))?;
    let samples = pixels
        .checked_mul(bands as usize)
        .ok_or_else(|| RasterError::Malformed("sample overflow".into()))?;

    let data = match dtype {
        Dtype::U8 => PixelData::U8(cur.take(samples)?.to_vec()),
        Dtype::U16 => {
            let raw = cur.take(samples * 2)?;
            PixelData::U16(
                raw.chunks_exact(2)
                    .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        }
        Dtype::F32 => {
            let raw = cur.take(samples * 4)?;
            PixelData::F32(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        }
    };

    let valid = if flags & FLAG_VALIDITY != 0 {
        let bitmap = cur.take(pixels.div_ceil(8))?;
        (0..pixels)
            .map(|p| bitmap[p / 8] & (0x80 >> (p % 8)) != 0)
            .collect()
    } else {
        vec![true; pixels]
    };

    if cur.at != body.len() {
        return Err(RasterError::Malformed(format!(
            "{} trailing bytes",
            body.len() - cur.at
        )));
    }

    RasterTile::new(key, spec, width, height, bands, data, valid, timestamp, sensor)
}
