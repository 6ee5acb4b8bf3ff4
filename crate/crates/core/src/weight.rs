//! Viewing-direction prior and viewport-pooled weight maps.
//!
//! The prior is a separable mixture: three Gaussian terms over longitude times
//! three over latitude. A pixel's non-content weight is the largest prior value
//! among all viewport centers whose ±30° viewport covers that pixel; the map is
//! then normalized to sum to one.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::media_io::read_csv_rows;
use crate::sphere::{column_longitude, row_latitude, BinaryMap, LocalFrame, SphereDirection};

/// Finest grid on which viewport pooling is evaluated (about 1° steps); larger
/// maps are bilinear upsamplings of it.
pub const POOL_GRID_WIDTH: usize = 360;
pub const POOL_GRID_HEIGHT: usize = 180;

const NORMALIZED_TOL: f64 = 1e-9;

/// One term `a · exp(−((x − b) / c)²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GaussTerm {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let z = (x - self.b) / self.c;
        self.a * (-(z * z)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmmParams {
    longitude: [GaussTerm; 3],
    latitude: [GaussTerm; 3],
}

impl Default for GmmParams {
    /// Mixture fitted to viewing directions of 40 subjects over 48 sequences.
    fn default() -> Self {
        let t = |a, b, c| GaussTerm { a, b, c };
        Self {
            longitude: [
                t(0.0034, -0.1549, 4.6740),
                t(0.0106, 1.5140, 18.51),
                t(0.0032, 6.3670, 110.5),
            ],
            latitude: [
                t(0.0075, -2.3738, 6.6437),
                t(0.0209, 1.8260, 14.8171),
                t(0.0057, 1.4618, 36.1311),
            ],
        }
    }
}

impl GmmParams {
    pub fn new(longitude: [GaussTerm; 3], latitude: [GaussTerm; 3]) -> Result<Self> {
        for (axis, terms) in [("longitude", &longitude), ("latitude", &latitude)] {
            for (k, term) in terms.iter().enumerate() {
                if !(term.a.is_finite() && term.b.is_finite() && term.c.is_finite()) {
                    return Err(Error::arg(format!("{axis} term {}: non-finite", k + 1)));
                }
                if term.a <= 0.0 {
                    return Err(Error::arg(format!("{axis} term {}: a must be > 0", k + 1)));
                }
                if term.c == 0.0 {
                    return Err(Error::arg(format!("{axis} term {}: c must be non-zero", k + 1)));
                }
            }
        }
        Ok(Self {
            longitude,
            latitude,
        })
    }

    /// Builds parameters without the positivity check (for degenerate mixtures in tests and analyses).
    pub fn new_unchecked(longitude: [GaussTerm; 3], latitude: [GaussTerm; 3]) -> Self {
        Self {
            longitude,
            latitude,
        }
    }

    pub fn longitude_terms(&self) -> &[GaussTerm; 3] {
        &self.longitude
    }

    pub fn latitude_terms(&self) -> &[GaussTerm; 3] {
        &self.latitude
    }

    #[inline]
    pub fn longitude_mixture(&self, lon: f64) -> f64 {
        self.longitude.iter().map(|t| t.eval(lon)).sum()
    }

    #[inline]
    pub fn latitude_mixture(&self, lat: f64) -> f64 {
        self.latitude.iter().map(|t| t.eval(lat)).sum()
    }
}

/// Mixture density `u(φ, θ)` of viewing directions.
pub fn gmm_density(d: SphereDirection, p: &GmmParams) -> f64 {
    p.longitude_mixture(d.longitude()) * p.latitude_mixture(d.latitude())
}

#[derive(Deserialize)]
struct GmmRow {
    axis: String,
    k: usize,
    a: f64,
    b: f64,
    c: f64,
}

/// Reads a six-row `axis,k,a,b,c` override file (`axis` is `longitude` or `latitude`, `k` in 1..=3).
pub fn load_gmm_params(path: impl AsRef<Path>) -> Result<GmmParams> {
    let rows: Vec<GmmRow> = read_csv_rows(path.as_ref())?;
    gmm_from_rows(rows)
}

pub fn parse_gmm_params(text: &str) -> Result<GmmParams> {
    gmm_from_rows(crate::media_io::parse_csv_rows(text, "gmm")?)
}

fn gmm_from_rows(rows: Vec<GmmRow>) -> Result<GmmParams> {
    if rows.len() != 6 {
        return Err(Error::data(format!(
            "GMM override needs exactly 6 rows, found {}",
            rows.len()
        )));
    }
    let mut lon = [None; 3];
    let mut lat = [None; 3];
    for row in rows {
        let slot = match row.axis.as_str() {
            "longitude" | "lon" => &mut lon,
            "latitude" | "lat" => &mut lat,
            other => return Err(Error::data(format!("unknown GMM axis `{other}`"))),
        };
        if !(1..=3).contains(&row.k) {
            return Err(Error::data(format!("GMM term index {} not in 1..=3", row.k)));
        }
        if slot[row.k - 1].is_some() {
            return Err(Error::data(format!("duplicate GMM term {} {}", row.axis, row.k)));
        }
        slot[row.k - 1] = Some(GaussTerm {
            a: row.a,
            b: row.b,
            c: row.c,
        });
    }
    let complete = |s: [Option<GaussTerm>; 3]| -> Result<[GaussTerm; 3]> {
        Ok([
            s[0].ok_or_else(|| Error::data("missing GMM term"))?,
            s[1].ok_or_else(|| Error::data("missing GMM term"))?,
            s[2].ok_or_else(|| Error::data("missing GMM term"))?,
        ])
    };
    GmmParams::new(complete(lon)?, complete(lat)?)
}

/// Non-negative per-pixel weights over a `W × H` ERP grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    width: usize,
    height: usize,
    weights: Vec<f64>,
    normalized: bool,
}

impl WeightMap {
    /// Wraps raw weights; the map counts as normalized when they sum to one within 1e-9.
    pub fn from_weights(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != width * height {
            return Err(Error::arg(format!(
                "weight map has {} entries, expected {width}x{height}",
                weights.len()
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::arg(format!("invalid weight {bad}")));
        }
        let sum: f64 = weights.iter().sum();
        Ok(Self {
            width,
            height,
            weights,
            normalized: (sum - 1.0).abs() <= NORMALIZED_TOL,
        })
    }

    /// Every pixel weighted `1 / (W·H)`.
    pub fn uniform(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            weights: vec![1.0 / n as f64; n],
            normalized: true,
        }
    }

    /// Scales the weights to sum to one.
    pub fn normalize(mut self) -> Result<Self> {
        let sum: f64 = self.weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::data("cannot normalize a weight map with zero total"));
        }
        for w in &mut self.weights {
            *w /= sum;
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Weight at 1-based pixel `(s, t)`.
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.weights[(t - 1) * self.width + (s - 1)]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn check_grid(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::arg(format!("grid {width}x{height} too small (need >= 2x2)")));
    }
    Ok(())
}

/// Per-pixel prior `v(s, t) = u(direction of (s, t))`, unnormalized.
pub fn direction_probability_map(width: usize, height: usize, p: &GmmParams) -> Result<WeightMap> {
    check_grid(width, height)?;
    let lon: Vec<f64> = (1..=width)
        .map(|s| p.longitude_mixture(column_longitude(s, width)))
        .collect();
    let mut weights = Vec::with_capacity(width * height);
    for t in 1..=height {
        let a = p.latitude_mixture(row_latitude(t, height));
        weights.extend(lon.iter().map(|l| l * a));
    }
    WeightMap::from_weights(width, height, weights)
}

/// Unnormalized pooled weights `w(s, t)` with candidate centers on the pixel grid itself.
///
/// Containment depends only on the two latitudes and the longitude offset, so
/// for every (center row, pixel row) pair the admissible column offsets are
/// found once and reduced to cyclic runs; each run is then a range-max query
/// over the longitude mixture.
pub fn pooled_weights(width: usize, height: usize, p: &GmmParams) -> Result<Vec<f64>> {
    check_grid(width, height)?;
    // columns 1 and W are the same meridian, so the ring has W-1 distinct longitudes
    let ring = width - 1;
    let step = 360.0 / ring as f64;
    let lon_mix: Vec<f64> = (1..=ring)
        .map(|s| p.longitude_mixture(column_longitude(s, width)))
        .collect();
    let lat_mix: Vec<f64> = (1..=height)
        .map(|t| p.latitude_mixture(row_latitude(t, height)))
        .collect();
    let table = RangeMax::new(&lon_mix.repeat(3));

    let offset_trig: Vec<(f64, f64)> = (0..ring)
        .map(|m| SphereDirection::wrapped(m as f64 * step, 0.0).longitude().to_radians().sin_cos())
        .collect();
    let frames: Vec<LocalFrame> = (1..=height)
        .map(|t| LocalFrame::new(SphereDirection::wrapped(0.0, row_latitude(t, height))))
        .collect();

    let mut out = vec![0.0; width * height];
    let mut admissible = vec![false; ring];
    for tp in 1..=height {
        let (sp, cp) = row_latitude(tp, height).to_radians().sin_cos();
        // (center row, runs of column offsets) covering this pixel row
        let mut row_runs: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        for (tc_idx, frame) in frames.iter().enumerate() {
            // pixel longitude minus center longitude is m·step; the center sits at 0°
            for (m, slot) in admissible.iter_mut().enumerate() {
                let (sl, cl) = offset_trig[m];
                *slot = frame.contains_vector([cp * cl, cp * sl, sp]);
            }
            let runs = cyclic_runs(&admissible);
            if !runs.is_empty() {
                row_runs.push((tc_idx, runs));
            }
        }
        let row = &mut out[(tp - 1) * width..tp * width];
        for ip in 0..ring {
            let mut best = 0.0f64;
            for (tc_idx, runs) in &row_runs {
                let a = lat_mix[*tc_idx];
                for &(start, len) in runs {
                    // pixel column ip sees center column ip - m (mod ring)
                    let lo = ip + ring + ring - (start + len - 1);
                    let l = table.query(lo, lo + len);
                    best = best.max(l * a);
                }
            }
            row[ip] = best;
        }
        row[ring] = row[0];
    }
    Ok(out)
}

/// Maximal runs of `true` in a cyclic boolean array as `(start, len)`.
fn cyclic_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let n = flags.len();
    if flags.iter().all(|&f| f) {
        return vec![(0, n)];
    }
    let Some(first_false) = flags.iter().position(|&f| !f) else {
        return vec![(0, n)];
    };
    let mut runs = Vec::new();
    let mut k = 0;
    while k < n {
        let idx = (first_false + k) % n;
        if flags[idx] {
            let start = idx;
            let mut len = 0;
            while k < n && flags[(first_false + k) % n] {
                len += 1;
                k += 1;
            }
            runs.push((start, len));
        } else {
            k += 1;
        }
    }
    runs
}

/// Sparse table for O(1) range-maximum queries on a fixed array.
struct RangeMax {
    levels: Vec<Vec<f64>>,
}

impl RangeMax {
    fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while width * 2 <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=values.len() - width * 2)
                .map(|i| prev[i].max(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    /// Maximum over `lo..hi` (non-empty).
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let span = 1 << level;
        self.levels[level][lo].max(self.levels[level][hi - span])
    }
}

/// Bilinear resample of a grid whose corners coincide with the target's.
fn upsample_corner_aligned(
    src: &[f64],
    src_w: usize,
    src_h: usize,
    width: usize,
    height: usize,
) -> Vec<f64> {
    let axis = |n_src: usize, n_dst: usize| -> Vec<(usize, usize, f64)> {
        (0..n_dst)
            .map(|i| {
                let x = i as f64 * (n_src - 1) as f64 / (n_dst - 1) as f64;
                let x0 = (x.floor() as usize).min(n_src - 1);
                let x1 = (x0 + 1).min(n_src - 1);
                (x0, x1, x - x0 as f64)
            })
            .collect()
    };
    let cols = axis(src_w, width);
    let rows = axis(src_h, height);
    let mut out = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &rows {
        let r0 = &src[y0 * src_w..(y0 + 1) * src_w];
        let r1 = &src[y1 * src_w..(y1 + 1) * src_w];
        out.extend(cols.iter().map(|&(x0, x1, fx)| {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            top + (bottom - top) * fy
        }));
    }
    out
}

/// Bilinearly resamples a map to another ERP resolution and renormalizes it.
pub fn resample_weight_map(map: &WeightMap, width: usize, height: usize) -> Result<WeightMap> {
    check_grid(width, height)?;
    let values = upsample_corner_aligned(map.weights(), map.width(), map.height(), width, height);
    WeightMap::from_weights(width, height, values)?.normalize()
}

/// Normalized non-content weight map for a `W × H` frame.
///
/// Pooling runs on the frame grid when it fits within the pool grid, otherwise
/// on the pool grid followed by bilinear upsampling.
pub fn ncp_weight_map(width: usize, height: usize, p: &GmmParams) -> Result<WeightMap> {
    check_grid(width, height)?;
    let pw = width.min(POOL_GRID_WIDTH);
    let ph = height.min(POOL_GRID_HEIGHT);
    let pooled = pooled_weights(pw, ph, p)?;
    let weights = if (pw, ph) == (width, height) {
        pooled
    } else {
        upsample_corner_aligned(&pooled, pw, ph, width, height)
    };
    WeightMap::from_weights(width, height, weights)?.normalize()
}

/// Content weight map: the non-content map restricted to a viewport mask and renormalized.
pub fn cp_weight_map(ncp: &WeightMap, mask: &BinaryMap) -> Result<WeightMap> {
    if (ncp.width(), ncp.height()) != (mask.width(), mask.height()) {
        return Err(Error::arg(format!(
            "mask {}x{} does not match weight map {}x{}",
            mask.width(),
            mask.height(),
            ncp.width(),
            ncp.height()
        )));
    }
    if mask.bits().iter().all(|&b| b) {
        return Ok(ncp.clone());
    }
    let weights: Vec<f64> = ncp
        .weights()
        .iter()
        .zip(mask.bits())
        .map(|(&w, &m)| if m { w } else { 0.0 })
        .collect();
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::data(
            "viewport mask selects only zero weights; content weight map undefined",
        ));
    }
    WeightMap::from_weights(ncp.width(), ncp.height(), weights)?.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{direction_to_pixel, viewport_binary_map};

    fn dir(lon: f64, lat: f64) -> SphereDirection {
        SphereDirection::new(lon, lat).unwrap()
    }

    #[test]
    fn density_at_front() {
        let u = gmm_density(SphereDirection::FRONT, &GmmParams::default());
        assert!((u - 5.63e-4).abs() < 0.01e-4, "{u}");
    }

    #[test]
    fn zero_mixture() {
        let z = GaussTerm { a: 0.0, b: 0.0, c: 1.0 };
        let p = GmmParams::new_unchecked([z; 3], [z; 3]);
        assert_eq!(gmm_density(dir(12.0, -3.0), &p), 0.0);
        assert!(GmmParams::new([z; 3], [z; 3]).is_err());
    }

    #[test]
    fn front_beats_back_and_pole() {
        let p = GmmParams::default();
        let front = gmm_density(SphereDirection::FRONT, &p);
        assert!(front > gmm_density(dir(180.0, 0.0), &p));
        assert!(front > gmm_density(dir(0.0, 90.0), &p));
    }

    #[test]
    fn two_by_two_probability_map_is_corner_densities() {
        let p = GmmParams::default();
        let v = direction_probability_map(2, 2, &p).unwrap();
        for (s, t, lon, lat) in [(1, 1, 180.0, 90.0), (2, 1, -180.0, 90.0), (1, 2, 180.0, -90.0), (2, 2, -180.0, -90.0)] {
            assert_eq!(v.get(s, t), gmm_density(dir(lon, lat), &p));
        }
    }

    #[test]
    fn probability_map_positive() {
        let v = direction_probability_map(90, 45, &GmmParams::default()).unwrap();
        assert!(v.weights().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn cyclic_runs_wraps() {
        assert_eq!(cyclic_runs(&[true, false, false, true]), vec![(3, 2)]);
        assert_eq!(cyclic_runs(&[true, true]), vec![(0, 2)]);
        assert_eq!(cyclic_runs(&[false, true, false, true]), vec![(1, 1), (3, 1)]);
        assert!(cyclic_runs(&[false, false]).is_empty());
    }

    #[test]
    fn range_max_matches_scan() {
        let v: Vec<f64> = (0..37).map(|i| ((i * 7919) % 31) as f64).collect();
        let t = RangeMax::new(&v);
        for lo in 0..37 {
            for hi in lo + 1..=37 {
                let expected = v[lo..hi].iter().cloned().fold(f64::MIN, f64::max);
                assert_eq!(t.query(lo, hi), expected);
            }
        }
    }

    #[test]
    fn pooling_never_below_own_density() {
        let p = GmmParams::default();
        let (w, h) = (72, 36);
        let pooled = pooled_weights(w, h, &p).unwrap();
        let v = direction_probability_map(w, h, &p).unwrap();
        for (a, b) in pooled.iter().zip(v.weights()) {
            assert!(a >= b);
        }
        let map = ncp_weight_map(w, h, &p).unwrap();
        let total: f64 = pooled.iter().sum();
        for (k, wt) in map.weights().iter().enumerate() {
            assert!(*wt >= v.weights()[k] / total * (1.0 - 1e-12));
        }
    }

    #[test]
    fn flat_mixture_gives_uniform_map() {
        let flat = GaussTerm { a: 1.0, b: 0.0, c: 1e12 };
        let p = GmmParams::new([flat; 3], [flat; 3]).unwrap();
        let map = ncp_weight_map(40, 20, &p).unwrap();
        let expected = 1.0 / 800.0;
        assert!(map.weights().iter().all(|w| (w - expected).abs() < 1e-15));
    }

    #[test]
    fn normalized_and_front_dominant() {
        let map = ncp_weight_map(360, 180, &GmmParams::default()).unwrap();
        assert!((map.sum() - 1.0).abs() < 1e-9);
        assert!(map.is_normalized());
        let at = |lon, lat| {
            let (s, t) = direction_to_pixel(dir(lon, lat), 360, 180);
            map.get(s.round() as usize, t.round() as usize)
        };
        assert!(at(0.0, 0.0) > at(180.0, 0.0));
        assert!(at(0.0, 0.0) > at(0.0, 90.0));
    }

    #[test]
    fn identity_mask_returns_input() {
        let ncp = ncp_weight_map(36, 18, &GmmParams::default()).unwrap();
        let out = cp_weight_map(&ncp, &BinaryMap::filled(36, 18, true)).unwrap();
        assert_eq!(out, ncp);
    }

    #[test]
    fn single_pixel_mask() {
        let ncp = ncp_weight_map(36, 18, &GmmParams::default()).unwrap();
        let mut bits = vec![false; 36 * 18];
        bits[100] = true;
        let out = cp_weight_map(&ncp, &BinaryMap::new(36, 18, bits).unwrap()).unwrap();
        assert_eq!(out.weights()[100], 1.0);
        assert_eq!(out.sum(), 1.0);
    }

    #[test]
    fn zero_product_is_error() {
        let ncp = WeightMap::from_weights(2, 2, vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        let mask = BinaryMap::new(2, 2, vec![true, true, false, false]).unwrap();
        assert!(matches!(cp_weight_map(&ncp, &mask), Err(Error::Data(_))));
    }

    #[test]
    fn front_viewport_captures_mode() {
        let ncp = ncp_weight_map(360, 180, &GmmParams::default()).unwrap();
        let mask = viewport_binary_map(SphereDirection::FRONT, 360, 180).unwrap();
        let masked: f64 = ncp
            .weights()
            .iter()
            .zip(mask.bits())
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum();
        assert!(masked > 0.2, "{masked}");
        let cp = cp_weight_map(&ncp, &mask).unwrap();
        assert!((cp.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gmm_override_file() {
        let p = parse_gmm_params(
            "axis,k,a,b,c\nlongitude,1,1,0,10\nlongitude,2,1,0,10\nlongitude,3,1,0,10\n\
             latitude,1,1,0,5\nlatitude,2,1,0,5\nlatitude,3,1,0,5\n",
        )
        .unwrap();
        assert_eq!(gmm_density(SphereDirection::FRONT, &p), 9.0);
        assert!(parse_gmm_params("axis,k,a,b,c\nlongitude,1,1,0,10\n").is_err());
    }
}
