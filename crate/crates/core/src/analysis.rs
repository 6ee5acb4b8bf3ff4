//! Statistics over recorded viewing directions: longitude/latitude
//! correlation, Gaussian heat maps, and correlation between heat maps.

use crate::error::{Error, Result};
use crate::media_io::TraceSet;
use crate::sphere::direction_to_pixel;

pub const DEFAULT_HEATMAP_SIGMA_DEG: f64 = 10.0;

/// Pearson correlation of two equal-length samples; fails when either is constant.
pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::arg(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::arg("correlation needs at least 2 values"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::data("correlation undefined for a constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation between longitude and latitude over all samples.
pub fn lonlat_correlation(traces: &TraceSet) -> Result<f64> {
    let lon: Vec<f64> = traces.records().iter().map(|r| r.direction.longitude()).collect();
    let lat: Vec<f64> = traces.records().iter().map(|r| r.direction.latitude()).collect();
    pearson(&lon, &lat)
}

/// Smoothed density of viewing directions on an ERP grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatMap {
    width: usize,
    height: usize,
    density: Vec<f64>,
}

impl HeatMap {
    pub fn new(width: usize, height: usize, density: Vec<f64>) -> Result<Self> {
        if density.len() != width * height {
            return Err(Error::arg(format!(
                "heat map needs {width}x{height} values, got {}",
                density.len()
            )));
        }
        if density.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg("heat map values must be finite and nonnegative"));
        }
        Ok(Self {
            width,
            height,
            density,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Value at 1-based pixel `(s, t)`.
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.density[(t - 1) * self.width + (s - 1)]
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum()
    }
}

fn discrete_gaussian(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Unit impulse per sample at its nearest pixel, spread by a Gaussian of
/// `sigma_deg` degrees. Longitude wraps around; mass pushed past a pole is
/// kept on the edge row, so the total equals the sample count.
pub fn heatmap_from_traces(traces: &TraceSet, width: usize, height: usize, sigma_deg: f64) -> Result<HeatMap> {
    if width < 2 || height < 2 {
        return Err(Error::arg(format!("grid {width}x{height} too small")));
    }
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(Error::arg(format!("invalid sigma {sigma_deg}")));
    }
    if traces.is_empty() {
        return Err(Error::data("heat map needs at least one sample"));
    }
    let mut impulses = vec![0.0; width * height];
    for r in traces.records() {
        let (s, t) = direction_to_pixel(r.direction, width, height);
        let x = (s.round() as usize).clamp(1, width) - 1;
        let y = (t.round() as usize).clamp(1, height) - 1;
        impulses[y * width + x] += 1.0;
    }
    let kx = discrete_gaussian(sigma_deg * (width - 1) as f64 / 360.0);
    let ky = discrete_gaussian(sigma_deg * (height - 1) as f64 / 180.0);
    let (rx, ry) = ((kx.len() / 2) as isize, (ky.len() / 2) as isize);

    let mut rows = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let v = impulses[y * width + x];
            if v == 0.0 {
                continue;
            }
            for (j, w) in kx.iter().enumerate() {
                let xx = (x as isize + j as isize - rx).rem_euclid(width as isize) as usize;
                rows[y * width + xx] += v * w;
            }
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for (j, w) in ky.iter().enumerate() {
            let yy = (y as isize + j as isize - ry).clamp(0, height as isize - 1) as usize;
            for x in 0..width {
                out[yy * width + x] += rows[y * width + x] * w;
            }
        }
    }
    HeatMap::new(width, height, out)
}

/// Linear correlation coefficient of two heat maps over pixels.
pub fn heatmap_cc(a: &HeatMap, b: &HeatMap) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::arg(format!(
            "heat maps differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    pearson(&a.density, &b.density)
}
