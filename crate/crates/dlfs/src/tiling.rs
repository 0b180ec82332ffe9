//! UTM tiling and Web-Mercator level arithmetic.
//!
//! The grid is parameterized by its origin, the tile pixel count, a border
//! overlap, and the pixel resolution, applied identically to each of the 60
//! UTM zones. Cells are half-open `[lower, upper)` on both axes, so every
//! point belongs to exactly one tile interior. Tiles south of the equator
//! carry negative northing indices.
//!
//! Within a tile, pixel `(row 0, col 0)` sits at the north-west corner of
//! the bordered extent and rows grow southward, the usual raster layout.

use std::f64::consts::PI;

/// WGS84 semi-major axis, meters.
const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// UTM central-meridian scale factor.
const UTM_K0: f64 = 0.9996;
/// UTM false easting, meters.
const UTM_FALSE_EASTING: f64 = 500_000.0;

#[derive(Debug, thiserror::Error)]
pub enum TileError {
    #[error("latitude {0} outside the UTM range (-80, 84)")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("invalid tile spec: {0}")]
    InvalidSpec(String),
    #[error("point ({easting}, {northing}) outside the bordered tile")]
    OutOfTile { easting: f64, northing: f64 },
    #[error("pixel ({row}, {col}) outside the tile grid")]
    PixelOutOfTile { row: i64, col: i64 },
    #[error("tile index overflows the grid range")]
    IndexOverflow,
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("web-mercator level {0} overflows a 64-bit tile count")]
    LevelOverflow(u32),
    #[error("zone {0} outside [1, 60]")]
    ZoneOutOfRange(u16),
}

pub type Result<T> = std::result::Result<T, TileError>;

/// Parameters of the tiling grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TileSpec {
    /// Pixels per tile side, excluding borders.
    pub tile_px: u32,
    /// Overlap pixels appended on every side.
    pub border_px: u32,
    /// Meters per pixel.
    pub resolution_m: f64,
    /// Easting of the grid origin, meters.
    pub origin_easting_m: f64,
    /// Northing of the grid origin, meters; 0 puts the origin on the equator.
    pub origin_northing_m: f64,
}

impl TileSpec {
    pub fn new(
        tile_px: u32,
        border_px: u32,
        resolution_m: f64,
        origin_easting_m: f64,
        origin_northing_m: f64,
    ) -> Result<Self> {
        let spec = TileSpec {
            tile_px,
            border_px,
            resolution_m,
            origin_easting_m,
            origin_northing_m,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_px <= 2 * self.border_px {
            return Err(TileError::InvalidSpec(format!(
                "tile_px {} must exceed twice the border {}",
                self.tile_px, self.border_px
            )));
        }
        if !(self.resolution_m > 0.0) {
            return Err(TileError::InvalidSpec(format!(
                "resolution {} must be positive",
                self.resolution_m
            )));
        }
        if !(self.origin_easting_m.is_finite() && self.origin_northing_m.is_finite()) {
            return Err(TileError::InvalidSpec("non-finite origin".into()));
        }
        Ok(())
    }

    /// Interior tile extent in meters.
    pub fn tile_extent_m(&self) -> f64 {
        self.tile_px as f64 * self.resolution_m
    }

    /// Border width in meters.
    pub fn border_m(&self) -> f64 {
        self.border_px as f64 * self.resolution_m
    }

    /// Pixels per side of a bordered tile raster.
    pub fn gridded_px(&self) -> u32 {
        self.tile_px + 2 * self.border_px
    }
}

impl Default for TileSpec {
    /// 4096 px tiles at 10 m with a 16 px border, origin on the equator.
    fn default() -> Self {
        TileSpec {
            tile_px: 4096,
            border_px: 16,
            resolution_m: 10.0,
            origin_easting_m: 0.0,
            origin_northing_m: 0.0,
        }
    }
}

/// Address of one cell: UTM zone plus signed grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct TileKey {
    /// UTM zone, 1..=60.
    pub zone: u8,
    /// East-west index.
    pub i: i32,
    /// North-south index; negative south of the equator when the origin
    /// northing is 0.
    pub j: i32,
}

impl TileKey {
    pub fn new(zone: u8, i: i32, j: i32) -> Result<Self> {
        if !(1..=60).contains(&zone) {
            return Err(TileError::ZoneOutOfRange(zone as u16));
        }
        Ok(TileKey { zone, i, j })
    }
}

impl std::fmt::Display for TileKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "z{}/{}/{}", self.zone, self.i, self.j)
    }
}

/// Axis-aligned rectangle in easting/northing meters, half-open on both
/// axes: `[min_easting, max_easting) x [min_northing, max_northing)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeoRect {
    pub min_easting: f64,
    pub min_northing: f64,
    pub max_easting: f64,
    pub max_northing: f64,
}

impl GeoRect {
    pub fn contains(&self, easting: f64, northing: f64) -> bool {
        easting >= self.min_easting
            && easting < self.max_easting
            && northing >= self.min_northing
            && northing < self.max_northing
    }

    pub fn intersects(&self, other: &GeoRect) -> bool {
        self.min_easting < other.max_easting
            && other.min_easting < self.max_easting
            && self.min_northing < other.max_northing
            && other.min_northing < self.max_northing
    }

    pub fn width(&self) -> f64 {
        self.max_easting - self.min_easting
    }

    pub fn height(&self) -> f64 {
        self.max_northing - self.min_northing
    }
}

/// UTM zone for a longitude/latitude, degrees: `floor((lon+180)/6)+1`,
/// with +180 wrapping to zone 1.
pub fn zone_for_lonlat(lon_deg: f64, lat_deg: f64) -> Result<u8> {
    if !(-80.0..84.0).contains(&lat_deg) || lat_deg == -80.0 {
        return Err(TileError::LatitudeOutOfRange(lat_deg));
    }
    if !(-180.0..=180.0).contains(&lon_deg) {
        return Err(TileError::LongitudeOutOfRange(lon_deg));
    }
    if lon_deg == 180.0 {
        return Ok(1);
    }
    Ok((((lon_deg + 180.0) / 6.0).floor() as i32 + 1) as u8)
}

/// Central meridian of a zone, degrees.
pub fn zone_central_meridian_deg(zone: u8) -> f64 {
    (zone as f64 - 1.0) * 6.0 - 180.0 + 3.0
}

/// Grid indices of the cell containing a point.
pub fn tile_index(easting_m: f64, northing_m: f64, spec: &TileSpec) -> Result<(i32, i32)> {
    spec.validate()?;
    let extent = spec.tile_extent_m();
    let i = ((easting_m - spec.origin_easting_m) / extent).floor();
    let j = ((northing_m - spec.origin_northing_m) / extent).floor();
    if i.abs() > i32::MAX as f64 || j.abs() > i32::MAX as f64 {
        return Err(TileError::IndexOverflow);
    }
    Ok((i as i32, j as i32))
}

/// Tile rectangle; `with_border` expands by the overlap on each side.
pub fn tile_bounds(key: &TileKey, spec: &TileSpec, with_border: bool) -> GeoRect {
    let extent = spec.tile_extent_m();
    let border = if with_border { spec.border_m() } else { 0.0 };
    let min_easting = spec.origin_easting_m + key.i as f64 * extent;
    let min_northing = spec.origin_northing_m + key.j as f64 * extent;
    GeoRect {
        min_easting: min_easting - border,
        min_northing: min_northing - border,
        max_easting: min_easting + extent + border,
        max_northing: min_northing + extent + border,
    }
}

/// Pixel `(row, col)` of a point within a tile's bordered grid. Row 0 is
/// the northern edge; the interior's north-west corner pixel is
/// `(border_px, border_px)`.
pub fn geo_to_pixel(
    easting_m: f64,
    northing_m: f64,
    key: &TileKey,
    spec: &TileSpec,
) -> Result<(u32, u32)> {
    let bordered = tile_bounds(key, spec, true);
    let res = spec.resolution_m;
    let col = ((easting_m - bordered.min_easting) / res).floor() as i64;
    let row = ((bordered.max_northing - northing_m) / res).floor() as i64;
    let side = spec.gridded_px() as i64;
    if col < 0 || col >= side || row < 0 || row >= side {
        return Err(TileError::OutOfTile {
            easting: easting_m,
            northing: northing_m,
        });
    }
    Ok((row as u32, col as u32))
}

/// Center coordinates of a pixel in a tile's bordered grid; the inverse of
/// [`geo_to_pixel`] at pixel centers.
pub fn pixel_to_geo(row: u32, col: u32, key: &TileKey, spec: &TileSpec) -> Result<(f64, f64)> {
    let side = spec.gridded_px();
    if row >= side || col >= side {
        return Err(TileError::PixelOutOfTile {
            row: row as i64,
            col: col as i64,
        });
    }
    let bordered = tile_bounds(key, spec, true);
    let res = spec.resolution_m;
    let easting = bordered.min_easting + (col as f64 + 0.5) * res;
    let northing = bordered.max_northing - (row as f64 + 0.5) * res;
    Ok((easting, northing))
}

/// North-west corner of a pixel (not its center); vertex of the pixel grid.
pub fn pixel_corner_to_geo(row: u32, col: u32, key: &TileKey, spec: &TileSpec) -> (f64, f64) {
    let bordered = tile_bounds(key, spec, true);
    let res = spec.resolution_m;
    (
        bordered.min_easting + col as f64 * res,
        bordered.max_northing - row as f64 * res,
    )
}

/// Tiles needed to span `distance_m`: `ceil(distance / tile extent)`.
pub fn span_count(distance_m: f64, spec: &TileSpec) -> Result<u64> {
    spec.validate()?;
    if !(distance_m > 0.0) {
        return Err(TileError::NonPositiveDistance(distance_m));
    }
    Ok((distance_m / spec.tile_extent_m()).ceil() as u64)
}

/// Number of Web-Mercator tiles at level `L`: exactly `4^L`.
pub fn webmercator_tile_count(level: u32) -> Result<u64> {
    if level > 31 {
        return Err(TileError::LevelOverflow(level));
    }
    Ok(1u64 << (2 * level))
}

// --- WGS84 <-> UTM conversion -------------------------------------------
//
// Transverse Mercator by the flattening series in the third flattening n,
// truncated at n^4: errors are micrometers within a zone. Northing is
// signed from the equator (no false northing), matching the signed
// tile-index convention above.

struct Projection {
    n: f64,
    radius: f64, // k0 * rectifying radius A
    alpha: [f64; 4],
    beta: [f64; 4],
    delta: [f64; 4],
}

impl Projection {
    fn wgs84() -> Self {
        let n = WGS84_F / (2.0 - WGS84_F);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n2 * n2;
        let big_a = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0);
        Projection {
            n,
            radius: UTM_K0 * big_a,
            alpha: [
                n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0,
                13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0,
                61.0 * n3 / 240.0 - 103.0 * n4 / 140.0,
                49561.0 * n4 / 161280.0,
            ],
            beta: [
                n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0,
                n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0,
                17.0 * n3 / 480.0 - 37.0 * n4 / 840.0,
                4397.0 * n4 / 161280.0,
            ],
            delta: [
                2.0 * n - 2.0 * n2 / 3.0 - 2.0 * n3 + 116.0 * n4 / 45.0,
                7.0 * n2 / 3.0 - 8.0 * n3 / 5.0 - 227.0 * n4 / 45.0,
                56.0 * n3 / 15.0 + 136.0 * n4 / 35.0,
                4279.0 * n4 / 630.0,
            ],
        }
    }
}

/// Forward conversion. Returns `(zone, easting, northing)` with the
/// standard 500 km false easting and signed northing from the equator.
pub fn lonlat_to_utm(lon_deg: f64, lat_deg: f64) -> Result<(u8, f64, f64)> {
    let zone = zone_for_lonlat(lon_deg, lat_deg)?;
    let (easting, northing) = lonlat_to_utm_zone(lon_deg, lat_deg, zone)?;
    Ok((zone, easting, northing))
}

/// Forward conversion into an explicit zone (needed near zone edges).
pub fn lonlat_to_utm_zone(lon_deg: f64, lat_deg: f64, zone: u8) -> Result<(f64, f64)> {
    if !(1..=60).contains(&zone) {
        return Err(TileError::ZoneOutOfRange(zone as u16));
    }
    let p = Projection::wgs84();
    let phi = lat_deg.to_radians();
    let lambda = (lon_deg - zone_central_meridian_deg(zone)).to_radians();

    let c = 2.0 * p.n.sqrt() / (1.0 + p.n);
    let t = (phi.sin().atanh() - c * (c * phi.sin()).atanh()).sinh();
    let xi_p = t.atan2(lambda.cos());
    let eta_p = (lambda.sin() / (1.0 + t * t).sqrt()).atanh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in p.alpha.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    Ok((UTM_FALSE_EASTING + p.radius * eta, p.radius * xi))
}

/// Inverse conversion from zone + easting + signed northing to degrees.
pub fn utm_to_lonlat(zone: u8, easting_m: f64, northing_m: f64) -> Result<(f64, f64)> {
    if !(1..=60).contains(&zone) {
        return Err(TileError::ZoneOutOfRange(zone as u16));
    }
    let p = Projection::wgs84();
    let xi = northing_m / p.radius;
    let eta = (easting_m - UTM_FALSE_EASTING) / p.radius;

    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in p.beta.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }

    let chi = (xi_p.sin() / eta_p.cosh()).asin();
    let mut phi = chi;
    for (j, d) in p.delta.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        phi += d * (k * chi).sin();
    }
    let lambda = eta_p.sinh().atan2(xi_p.cos());
    Ok((
        zone_central_meridian_deg(zone) + lambda.to_degrees(),
        phi.to_degrees(),
    ))
}

/// Meters subtended by one degree of longitude at the equator; handy for
/// sizing sanity checks.
pub fn equator_degree_m() -> f64 {
    WGS84_A * PI / 180.0
}
