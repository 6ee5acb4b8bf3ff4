use crate::error::{Error, Result};
use crate::saliency::SaliencyMap;
use crate::sphere::ViewportImage;

pub const FEATURE_COUNT: usize = 5;

const CONTRAST_PATCH: usize = 32;

/// Candidate description fed to the forest:
/// distance to the viewport center, bearing, spread, mean saliency and local contrast.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector([f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn from_values(values: [f64; FEATURE_COUNT]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite feature in {values:?}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn distance(&self) -> f64 {
        self.0[0]
    }

    pub fn angle(&self) -> f64 {
        self.0[1]
    }

    pub fn spread(&self) -> f64 {
        self.0[2]
    }

    pub fn mean_saliency(&self) -> f64 {
        self.0[3]
    }

    pub fn local_contrast(&self) -> f64 {
        self.0[4]
    }
}

/// Features of a candidate at viewport point `(x, y)` with cluster spread `spread` (pixels).
///
/// The saliency map and the viewport must share the same side length.
pub fn extract_features(
    point: (f64, f64),
    spread: f64,
    saliency: &SaliencyMap,
    viewport: &ViewportImage,
) -> Result<FeatureVector> {
    let n = saliency.size();
    if viewport.size() != n {
        return Err(Error::arg(format!(
            "saliency map is {n}px but viewport is {}px",
            viewport.size()
        )));
    }
    let size = n as f64;
    let (x, y) = point;
    let (dx, dy) = (x - size / 2.0, y - size / 2.0);
    let dist = (dx * dx + dy * dy).sqrt() / size;
    let angle = if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx).to_degrees()
    };

    let clamp_idx = |v: f64| (v.floor().max(0.0) as usize).min(n - 1);
    let r = spread.max(0.0);
    let (x_lo, x_hi) = (clamp_idx(x - r - 1.0), clamp_idx(x + r + 1.0));
    let (y_lo, y_hi) = (clamp_idx(y - r - 1.0), clamp_idx(y + r + 1.0));
    let (mut sum, mut count) = (0.0, 0usize);
    for py in y_lo..=y_hi {
        for px in x_lo..=x_hi {
            let (ex, ey) = (px as f64 + 0.5 - x, py as f64 + 0.5 - y);
            if ex * ex + ey * ey <= r * r {
                sum += saliency.get(px, py);
                count += 1;
            }
        }
    }
    let mean_saliency = if count > 0 {
        sum / count as f64
    } else {
        saliency.get(clamp_idx(x), clamp_idx(y))
    };

    let half = CONTRAST_PATCH / 2;
    let cx = clamp_idx(x);
    let cy = clamp_idx(y);
    let px0 = cx.saturating_sub(half).min(n.saturating_sub(CONTRAST_PATCH));
    let py0 = cy.saturating_sub(half).min(n.saturating_sub(CONTRAST_PATCH));
    let luma = viewport.luma();
    let patch: Vec<f64> = (py0..(py0 + CONTRAST_PATCH).min(n))
        .flat_map(|py| (px0..(px0 + CONTRAST_PATCH).min(n)).map(move |px| luma[py * n + px]))
        .collect();
    let mean = patch.iter().sum::<f64>() / patch.len() as f64;
    let var = patch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / patch.len() as f64;

    FeatureVector::from_values([dist, angle, spread / size, mean_saliency, var.sqrt() / 255.0])
}
