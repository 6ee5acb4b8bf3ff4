//! Sphere geometry for equirectangular (ERP) frames.
//!
//! Pixel coordinates are 1-based `(s, t)` with `s` the column and `t` the row.
//! Column 1 is longitude +180°, column `W` is −180°; row 1 is latitude +90°.
//! Positive longitude therefore lies on the viewer's left.
//!
//! Unit vectors use `x` forward (0°, 0°), `y` left (90°, 0°) and `z` up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media_io::Frame;

/// Half extent of a viewport in both local axes, in degrees.
pub const VIEWPORT_HALF_EXTENT_DEG: f64 = 30.0;

/// Smallest renderable viewport side.
pub const MIN_VIEWPORT_SIZE: usize = 64;

pub const DEFAULT_VIEWPORT_SIZE: usize = 512;

// Slack for points lying on a viewport boundary.
const CONTAINS_EPS: f64 = 1e-12;

/// A viewing direction in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereDirection {
    longitude: f64,
    latitude: f64,
}

impl SphereDirection {
    pub const FRONT: SphereDirection = SphereDirection {
        longitude: 0.0,
        latitude: 0.0,
    };

    pub fn new(longitude: f64, latitude: f64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::arg(format!(
                "longitude {longitude} outside [-180, 180]"
            )));
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::arg(format!("latitude {latitude} outside [-90, 90]")));
        }
        Ok(Self {
            longitude,
            latitude,
        })
    }

    /// Wraps longitude into [−180, 180] and clamps latitude to [−90, 90].
    pub fn wrapped(longitude: f64, latitude: f64) -> Self {
        let mut lon = (longitude + 180.0).rem_euclid(360.0) - 180.0;
        if lon == -180.0 && longitude > 0.0 {
            lon = 180.0;
        }
        Self {
            longitude: lon,
            latitude: latitude.clamp(-90.0, 90.0),
        }
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (sl, cl) = self.longitude.to_radians().sin_cos();
        let (sp, cp) = self.latitude.to_radians().sin_cos();
        [cp * cl, cp * sl, sp]
    }

    /// Direction of a (not necessarily normalized) vector.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let horizontal = v[0].hypot(v[1]);
        let longitude = v[1].atan2(v[0]).to_degrees();
        let latitude = v[2].atan2(horizontal).to_degrees();
        Self::wrapped(longitude, latitude)
    }
}

/// Direction of the center of pixel `(s, t)` on a `W × H` ERP grid.
pub fn pixel_to_direction(s: usize, t: usize, width: usize, height: usize) -> Result<SphereDirection> {
    if width < 2 || height < 2 {
        return Err(Error::arg(format!("grid {width}x{height} too small")));
    }
    if s < 1 || s > width || t < 1 || t > height {
        return Err(Error::arg(format!(
            "pixel ({s}, {t}) outside 1..={width} x 1..={height}"
        )));
    }
    Ok(SphereDirection {
        longitude: column_longitude(s, width),
        latitude: row_latitude(t, height),
    })
}

pub(crate) fn column_longitude(s: usize, width: usize) -> f64 {
    -360.0 * ((s - 1) as f64 / (width - 1) as f64 - 0.5)
}

pub(crate) fn row_latitude(t: usize, height: usize) -> f64 {
    -180.0 * ((t - 1) as f64 / (height - 1) as f64 - 0.5)
}

/// Fractional 1-based pixel coordinates of a direction.
pub fn direction_to_pixel(d: SphereDirection, width: usize, height: usize) -> (f64, f64) {
    let s = 1.0 + (width - 1) as f64 * (0.5 - d.longitude / 360.0);
    let t = 1.0 + (height - 1) as f64 * (0.5 - d.latitude / 180.0);
    (s, t)
}

/// Great-circle angle between two directions, in degrees within [0, 180].
pub fn angular_distance(a: SphereDirection, b: SphereDirection) -> f64 {
    let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude - a.longitude).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    (2.0 * h.sqrt().min(1.0).asin()).to_degrees().clamp(0.0, 180.0)
}

/// Rotation taking a viewport center to (0°, 0°) with its local up towards +z.
#[derive(Clone, Copy, Debug)]
pub struct LocalFrame {
    cos_lon: f64,
    sin_lon: f64,
    cos_lat: f64,
    sin_lat: f64,
}

impl LocalFrame {
    pub fn new(center: SphereDirection) -> Self {
        let (sin_lon, cos_lon) = center.longitude.to_radians().sin_cos();
        let (sin_lat, cos_lat) = center.latitude.to_radians().sin_cos();
        Self {
            cos_lon,
            sin_lon,
            cos_lat,
            sin_lat,
        }
    }

    #[inline]
    pub fn to_local(&self, v: [f64; 3]) -> [f64; 3] {
        let x1 = v[0] * self.cos_lon + v[1] * self.sin_lon;
        let y1 = -v[0] * self.sin_lon + v[1] * self.cos_lon;
        let x2 = x1 * self.cos_lat + v[2] * self.sin_lat;
        let z2 = -x1 * self.sin_lat + v[2] * self.cos_lat;
        [x2, y1, z2]
    }

    #[inline]
    pub fn to_world(&self, l: [f64; 3]) -> [f64; 3] {
        let x1 = l[0] * self.cos_lat - l[2] * self.sin_lat;
        let z = l[0] * self.sin_lat + l[2] * self.cos_lat;
        let x = x1 * self.cos_lon - l[1] * self.sin_lon;
        let y = x1 * self.sin_lon + l[1] * self.cos_lon;
        [x, y, z]
    }

    /// Whether a unit vector lies inside the ±30° box around this frame's center.
    #[inline]
    pub fn contains_vector(&self, v: [f64; 3]) -> bool {
        let [x, y, z] = self.to_local(v);
        let tan_half = VIEWPORT_HALF_EXTENT_DEG.to_radians().tan();
        let sin_half = VIEWPORT_HALF_EXTENT_DEG.to_radians().sin();
        x > 0.0 && y.abs() <= x * tan_half + CONTAINS_EPS && z.abs() <= sin_half + CONTAINS_EPS
    }
}

/// Local (longitude, latitude) of `d` after rotating `center` to (0°, 0°).
pub fn local_angles(center: SphereDirection, d: SphereDirection) -> (f64, f64) {
    let [x, y, z] = LocalFrame::new(center).to_local(d.unit_vector());
    (y.atan2(x).to_degrees(), z.clamp(-1.0, 1.0).asin().to_degrees())
}

/// Whether `d` falls in the ±30° × ±30° viewport centered at `center`.
pub fn viewport_contains(center: SphereDirection, d: SphereDirection) -> bool {
    LocalFrame::new(center).contains_vector(d.unit_vector())
}

/// A square rectilinear view of the sphere around a center direction.
///
/// All three planes are rendered at `size × size`; values keep the 8-bit scale
/// but are stored as floats after interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewportImage {
    size: usize,
    center: SphereDirection,
    luma: Vec<f64>,
    chroma_u: Vec<f64>,
    chroma_v: Vec<f64>,
}

impl ViewportImage {
    pub fn from_planes(
        size: usize,
        center: SphereDirection,
        luma: Vec<f64>,
        chroma_u: Vec<f64>,
        chroma_v: Vec<f64>,
    ) -> Result<Self> {
        let n = size * size;
        if luma.len() != n || chroma_u.len() != n || chroma_v.len() != n {
            return Err(Error::arg(format!("viewport planes must hold {size}x{size} samples")));
        }
        Ok(Self {
            size,
            center,
            luma,
            chroma_u,
            chroma_v,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn center(&self) -> SphereDirection {
        self.center
    }

    pub fn luma(&self) -> &[f64] {
        &self.luma
    }

    pub fn chroma_u(&self) -> &[f64] {
        &self.chroma_u
    }

    pub fn chroma_v(&self) -> &[f64] {
        &self.chroma_v
    }
}

fn tan_half_extent() -> f64 {
    VIEWPORT_HALF_EXTENT_DEG.to_radians().tan()
}

/// Direction seen through viewport point `(x, y)`; pixel `(i, j)` has its center at `(i + 0.5, j + 0.5)`.
pub fn viewport_point_to_direction(center: SphereDirection, size: usize, x: f64, y: f64) -> SphereDirection {
    point_to_direction(&LocalFrame::new(center), size, x, y)
}

fn point_to_direction(frame: &LocalFrame, size: usize, x: f64, y: f64) -> SphereDirection {
    let t = tan_half_extent();
    let half = size as f64 / 2.0;
    let a = t * (1.0 - x / half);
    let b = t * (1.0 - y / half);
    SphereDirection::from_vector(frame.to_world([1.0, a, b]))
}

/// Viewport coordinates of a direction, or `None` when it lies behind the image plane.
pub fn direction_to_viewport_point(
    center: SphereDirection,
    size: usize,
    d: SphereDirection,
) -> Option<(f64, f64)> {
    let [x, y, z] = LocalFrame::new(center).to_local(d.unit_vector());
    if x <= 0.0 {
        return None;
    }
    let t = tan_half_extent();
    let half = size as f64 / 2.0;
    Some((half * (1.0 - y / x / t), half * (1.0 - z / x / t)))
}

/// Bilinear sample of an 8-bit plane at 1-based fractional coordinates.
///
/// Uses lerp form so a constant neighbourhood reproduces its value exactly.
fn sample_bilinear(plane: &[u8], width: usize, height: usize, s: f64, t: f64) -> f64 {
    let x = (s - 1.0).clamp(0.0, (width - 1) as f64);
    let y = (t - 1.0).clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p = |xx: usize, yy: usize| plane[yy * width + xx] as f64;
    let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * fx;
    let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * fx;
    top + (bottom - top) * fy
}

/// Renders the gnomonic ±30° view of `frame` around `center`.
pub fn render_viewport(frame: &Frame, center: SphereDirection, size: usize) -> Result<ViewportImage> {
    if size < MIN_VIEWPORT_SIZE {
        return Err(Error::arg(format!(
            "viewport size {size} below minimum {MIN_VIEWPORT_SIZE}"
        )));
    }
    let (w, h) = (frame.width(), frame.height());
    let (cw, ch) = (frame.chroma_width(), frame.chroma_height());
    let n = size * size;
    let mut luma = Vec::with_capacity(n);
    let mut chroma_u = Vec::with_capacity(n);
    let mut chroma_v = Vec::with_capacity(n);
    let local = LocalFrame::new(center);
    for j in 0..size {
        for i in 0..size {
            let d = point_to_direction(&local, size, i as f64 + 0.5, j as f64 + 0.5);
            let (s, t) = direction_to_pixel(d, w, h);
            luma.push(sample_bilinear(frame.luma(), w, h, s, t));
            let (cs, ct) = if cw >= 2 && ch >= 2 {
                direction_to_pixel(d, cw, ch)
            } else {
                (1.0, 1.0)
            };
            chroma_u.push(sample_bilinear(frame.chroma_u(), cw, ch, cs, ct));
            chroma_v.push(sample_bilinear(frame.chroma_v(), cw, ch, cs, ct));
        }
    }
    ViewportImage::from_planes(size, center, luma, chroma_u, chroma_v)
}

/// Row-major boolean grid over ERP pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::arg("binary map size mismatch"));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Value at 1-based pixel `(s, t)`.
    pub fn get(&self, s: usize, t: usize) -> bool {
        self.bits[(t - 1) * self.width + (s - 1)]
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Marks every ERP pixel whose direction lies in the viewport around `center`.
pub fn viewport_binary_map(center: SphereDirection, width: usize, height: usize) -> Result<BinaryMap> {
    if width < 2 || height < 2 {
        return Err(Error::arg(format!("grid {width}x{height} too small")));
    }
    let frame = LocalFrame::new(center);
    let columns: Vec<(f64, f64)> = (1..=width)
        .map(|s| column_longitude(s, width).to_radians().sin_cos())
        .collect();
    let mut bits = Vec::with_capacity(width * height);
    for t in 1..=height {
        let (sp, cp) = row_latitude(t, height).to_radians().sin_cos();
        bits.extend(
            columns
                .iter()
                .map(|&(sl, cl)| frame.contains_vector([cp * cl, cp * sl, sp])),
        );
    }
    BinaryMap::new(width, height, bits)
}

/// Cube-map face a direction falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Front,
    Left,
    Back,
    Right,
    Top,
    Bottom,
}

impl Region {
    /// Output order of regional scores.
    pub const ALL: [Region; 6] = [
        Region::Front,
        Region::Left,
        Region::Back,
        Region::Right,
        Region::Top,
        Region::Bottom,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Front => "front",
            Region::Left => "left",
            Region::Back => "back",
            Region::Right => "right",
            Region::Top => "top",
            Region::Bottom => "bottom",
        }
    }
}

/// Face whose axis dominates the direction's unit vector; ties go to the earlier face in [`Region::ALL`].
pub fn region_of(d: SphereDirection) -> Region {
    let [x, y, z] = d.unit_vector();
    let scores = [x, y, -x, -y, z, -z];
    let mut best = 0;
    for k in 1..6 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    Region::ALL[best]
}
