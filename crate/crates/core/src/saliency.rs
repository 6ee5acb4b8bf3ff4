//! Phase-spectrum saliency of viewport images.
//!
//! The four channels (motion, luma, U, V) form a quaternion image that is
//! transformed through its symplectic split into two complex images. Keeping
//! only the phase of the joint spectrum and transforming back highlights
//! regions that break the image's global regularities.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sphere::ViewportImage;

/// Smoothing scale as a fraction of the viewport side.
pub const SMOOTHING_FRACTION: f64 = 0.02;

/// Nonnegative `size × size` distribution, row-major, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    size: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    /// Normalizes arbitrary nonnegative values; an all-zero input becomes uniform.
    pub fn from_values(size: usize, mut values: Vec<f64>) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::arg(format!(
                "saliency map needs {size}x{size} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg("saliency values must be finite and nonnegative"));
        }
        let sum: f64 = values.iter().sum();
        if sum > 0.0 {
            values.iter_mut().for_each(|v| *v /= sum);
            Ok(Self { size, values })
        } else {
            Ok(Self::uniform(size))
        }
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            size,
            values: vec![1.0 / (size * size) as f64; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at 0-based column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.size + x]
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }
}

fn fft2(data: &mut [Complex64], n: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft.process(data);
    transpose(data, n);
    fft.process(data);
    transpose(data, n);
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with edge replication.
pub(crate) fn gaussian_blur(values: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let xx = (x as isize + k as isize - r).clamp(0, width as isize - 1) as usize;
                acc += w * row[xx];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        for (k, w) in kernel.iter().enumerate() {
            let yy = (y as isize + k as isize - r).clamp(0, height as isize - 1) as usize;
            let src = &tmp[yy * width..(yy + 1) * width];
            let dst = &mut out[y * width..(y + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Saliency of `current`; `previous` supplies the motion channel when present.
pub fn pqft_saliency(current: &ViewportImage, previous: Option<&ViewportImage>) -> Result<SaliencyMap> {
    let n = current.size();
    if let Some(prev) = previous {
        if prev.size() != n {
            return Err(Error::arg(format!(
                "previous viewport is {}px, current is {n}px",
                prev.size()
            )));
        }
    }
    let luma = current.luma();
    let motion: Vec<f64> = match previous {
        Some(prev) => luma
            .iter()
            .zip(prev.luma())
            .map(|(a, b)| (a - b).abs() / 255.0)
            .collect(),
        None => vec![0.0; n * n],
    };
    let constant = |plane: &[f64]| plane.iter().all(|&v| v == plane[0]);
    if constant(&motion) && constant(luma) && constant(current.chroma_u()) && constant(current.chroma_v()) {
        return Ok(SaliencyMap::uniform(n));
    }

    let mut f1: Vec<Complex64> = motion
        .iter()
        .zip(luma)
        .map(|(&m, &y)| Complex64::new(m, y / 255.0))
        .collect();
    let mut f2: Vec<Complex64> = current
        .chroma_u()
        .iter()
        .zip(current.chroma_v())
        .map(|(&u, &v)| Complex64::new((u - 128.0) / 255.0, (v - 128.0) / 255.0))
        .collect();

    let mut planner = FftPlanner::new();
    fft2(&mut f1, n, &mut planner, false);
    fft2(&mut f2, n, &mut planner, false);
    for (a, b) in f1.iter_mut().zip(f2.iter_mut()) {
        let mag = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if mag > 0.0 {
            *a /= mag;
            *b /= mag;
        } else {
            *a = Complex64::new(0.0, 0.0);
            *b = Complex64::new(0.0, 0.0);
        }
    }
    fft2(&mut f1, n, &mut planner, true);
    fft2(&mut f2, n, &mut planner, true);

    let energy: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    let smoothed = gaussian_blur(&energy, n, n, SMOOTHING_FRACTION * n as f64);
    SaliencyMap::from_values(n, smoothed.into_iter().map(|v| v.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::SphereDirection;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn viewport(size: usize, luma: Vec<f64>) -> ViewportImage {
        let n = size * size;
        ViewportImage::from_planes(size, SphereDirection::FRONT, luma, vec![128.0; n], vec![128.0; n]).unwrap()
    }

    fn gray_with_patch(size: usize, x0: usize, y0: usize) -> Vec<f64> {
        let mut luma = vec![128.0; size * size];
        for y in y0..y0 + 8 {
            for x in x0..x0 + 8 {
                luma[y * size + x] = 255.0;
            }
        }
        luma
    }

    fn argmax(map: &SaliencyMap) -> (usize, usize) {
        let (i, _) = map
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        (i % map.size(), i / map.size())
    }

    #[test]
    fn white_noise_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let luma = (0..64 * 64).map(|_| rng.gen_range(0.0..255.0)).collect();
        let s = pqft_saliency(&viewport(64, luma), None).unwrap();
        assert!((s.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(s.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn constant_is_uniform() {
        let s = pqft_saliency(&viewport(64, vec![90.0; 4096]), None).unwrap();
        assert!(s.is_uniform());
    }

    #[test]
    fn patch_pops_out() {
        let size = 256;
        let s = pqft_saliency(&viewport(size, gray_with_patch(size, 124, 124)), None).unwrap();
        let disc_mass = |cx: f64, cy: f64| {
            let mut m = 0.0;
            for y in 0..size {
                for x in 0..size {
                    let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                    if dx * dx + dy * dy <= 32.0 * 32.0 {
                        m += s.get(x, y);
                    }
                }
            }
            m
        };
        let patch = disc_mass(128.0, 128.0);
        let flat = [(40.0, 40.0), (216.0, 40.0), (40.0, 216.0), (216.0, 216.0), (128.0, 40.0), (40.0, 128.0)]
            .iter()
            .map(|&(x, y)| disc_mass(x, y))
            .fold(0.0, f64::max);
        assert!(patch > 5.0 * flat, "{patch} vs {flat}");
    }

    #[test]
    fn motion_raises_saliency() {
        let size = 64;
        let scene = |ax: usize| {
            let mut luma = vec![128.0; size * size];
            for &(x0, y0) in &[(ax, 20), (8, 44), (44, 44)] {
                for y in y0..y0 + 8 {
                    for x in x0..x0 + 8 {
                        luma[y * size + x] = 255.0;
                    }
                }
            }
            luma
        };
        let cur = viewport(size, scene(28));
        let static_case = pqft_saliency(&cur, Some(&viewport(size, scene(28)))).unwrap();
        let moving_case = pqft_saliency(&cur, Some(&viewport(size, scene(24)))).unwrap();
        let at_block = |m: &SaliencyMap| {
            let mut sum = 0.0;
            for y in 20..28 {
                for x in 28..36 {
                    sum += m.get(x, y);
                }
            }
            sum
        };
        assert!(at_block(&moving_case) > at_block(&static_case));
    }

    #[test]
    fn translation_covariance() {
        let size = 128;
        let a = pqft_saliency(&viewport(size, gray_with_patch(size, 40, 50)), None).unwrap();
        let b = pqft_saliency(&viewport(size, gray_with_patch(size, 56, 50)), None).unwrap();
        let (ax, ay) = argmax(&a);
        let (bx, by) = argmax(&b);
        assert!(((bx as i64 - ax as i64) - 16).abs() <= 4);
        assert!((by as i64 - ay as i64).abs() <= 4);
    }

    #[test]
    fn size_mismatch() {
        let a = viewport(64, vec![0.0; 64 * 64]);
        let b = viewport(65, vec![0.0; 65 * 65]);
        assert!(matches!(pqft_saliency(&a, Some(&b)), Err(Error::Argument(_))));
    }

    #[test]
    fn deterministic() {
        let v = viewport(64, gray_with_patch(64, 10, 30));
        assert_eq!(pqft_saliency(&v, None).unwrap(), pqft_saliency(&v, None).unwrap());
    }
}
