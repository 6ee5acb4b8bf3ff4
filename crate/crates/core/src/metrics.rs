//! Luma-plane quality metrics and their viewing-direction weighted forms.
//!
//! The weighted PSNR family replaces the mean squared error by a sum of
//! squared errors weighted by a normalized map; the weighted SSIM family sums a
//! full-resolution SSIM map against the same kind of map.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{predict_trajectory, ForestModel, GazeConfig, Trajectory};
use crate::media_io::{encode_grid, model_id, short_digest, Frame, FrameSource};
use crate::sphere::{viewport_binary_map, SphereDirection};
use crate::weight::{cp_weight_map, WeightMap};

pub const PSNR_CAP_DB: f64 = 100.0;
const ZERO_ERROR: f64 = 1e-10;
const PEAK: f64 = 255.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

const FRAME_BATCH: usize = 8;

fn check_same(a: &[u8], b: &[u8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "luma planes differ in size: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn check_weights(len: usize, w: &WeightMap) -> Result<()> {
    if w.weights().len() != len {
        return Err(Error::arg(format!(
            "weight map is {}x{} but frame has {len} pixels",
            w.width(),
            w.height()
        )));
    }
    if !w.is_normalized() {
        return Err(Error::arg("weight map must be normalized"));
    }
    Ok(())
}

/// `Σ (I − I')² · w`, with no division by the pixel count.
pub fn weighted_mse(reference: &[u8], distorted: &[u8], w: &WeightMap) -> Result<f64> {
    check_same(reference, distorted)?;
    check_weights(reference.len(), w)?;
    Ok(reference
        .iter()
        .zip(distorted)
        .zip(w.weights())
        .map(|((&a, &b), &wt)| {
            let e = a as f64 - b as f64;
            e * e * wt
        })
        .sum())
}

pub fn mse(reference: &[u8], distorted: &[u8]) -> Result<f64> {
    check_same(reference, distorted)?;
    if reference.is_empty() {
        return Err(Error::arg("empty luma plane"));
    }
    let sum: f64 = reference
        .iter()
        .zip(distorted)
        .map(|(&a, &b)| {
            let e = a as f64 - b as f64;
            e * e
        })
        .sum();
    Ok(sum / reference.len() as f64)
}

/// `10 log10(255² / mse)`, capped at 100 dB when the error vanishes.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < ZERO_ERROR {
        PSNR_CAP_DB
    } else {
        (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
    }
}

fn check_frames(reference: &Frame, distorted: &Frame) -> Result<()> {
    if (reference.width(), reference.height()) != (distorted.width(), distorted.height()) {
        return Err(Error::arg(format!(
            "frames differ: {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height()
        )));
    }
    Ok(())
}

pub fn psnr(reference: &Frame, distorted: &Frame) -> Result<f64> {
    check_frames(reference, distorted)?;
    Ok(psnr_from_mse(mse(reference.luma(), distorted.luma())?))
}

pub fn ncp_psnr(reference: &Frame, distorted: &Frame, w: &WeightMap) -> Result<f64> {
    check_frames(reference, distorted)?;
    Ok(psnr_from_mse(weighted_mse(reference.luma(), distorted.luma(), w)?))
}

/// Weighted PSNR restricted to the viewport around `dir`.
pub fn cp_psnr(reference: &Frame, distorted: &Frame, ncp: &WeightMap, dir: SphereDirection) -> Result<f64> {
    check_frames(reference, distorted)?;
    let mask = viewport_binary_map(dir, ncp.width(), ncp.height())?;
    ncp_psnr(reference, distorted, &cp_weight_map(ncp, &mask)?)
}

/// Index into `0..n` under symmetric (edge-repeating) reflection.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn filter_symmetric(values: &[f64], width: usize, height: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = k
                .iter()
                .enumerate()
                .map(|(j, w)| w * row[reflect(x as isize + j as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        for (j, w) in k.iter().enumerate() {
            let yy = reflect(y as isize + j as isize - r, height);
            let src = &tmp[yy * width..(yy + 1) * width];
            for (d, s) in out[y * width..(y + 1) * width].iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Local SSIM at every pixel (11×11 Gaussian window, σ = 1.5, symmetric padding).
pub fn ssim_map(reference: &[u8], distorted: &[u8], width: usize, height: usize) -> Result<Vec<f64>> {
    check_same(reference, distorted)?;
    if reference.len() != width * height {
        return Err(Error::arg(format!(
            "luma plane has {} samples, expected {width}x{height}",
            reference.len()
        )));
    }
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::arg(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {width}x{height}"
        )));
    }
    let k = gaussian_window();
    let x: Vec<f64> = reference.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = distorted.iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let [mx, my, sxx, syy, sxy] =
        [&x, &y, &xx, &yy, &xy].map(|p| filter_symmetric(p, width, height, &k));
    Ok((0..x.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            let var_x = sxx[i] - a * a;
            let var_y = syy[i] - b * b;
            let cov = sxy[i] - a * b;
            let num = (2.0 * a * b + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (a * a + b * b + SSIM_C1) * (var_x + var_y + SSIM_C2);
            (num / den).clamp(-1.0, 1.0)
        })
        .collect())
}

pub fn mean_ssim(reference: &Frame, distorted: &Frame) -> Result<f64> {
    check_frames(reference, distorted)?;
    let map = ssim_map(reference.luma(), distorted.luma(), reference.width(), reference.height())?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// `Σ m_SSIM · w` over the frame.
pub fn weighted_ssim(reference: &Frame, distorted: &Frame, w: &WeightMap) -> Result<f64> {
    check_frames(reference, distorted)?;
    check_weights(reference.luma().len(), w)?;
    let map = ssim_map(reference.luma(), distorted.luma(), reference.width(), reference.height())?;
    Ok(map.iter().zip(w.weights()).map(|(m, wt)| m * wt).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Psnr,
    Ssim,
    NcpPsnr,
    NcpSsim,
    CpPsnr,
    CpSsim,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Psnr,
        Metric::Ssim,
        Metric::NcpPsnr,
        Metric::NcpSsim,
        Metric::CpPsnr,
        Metric::CpSsim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::NcpPsnr => "ncp-psnr",
            Metric::NcpSsim => "ncp-ssim",
            Metric::CpPsnr => "cp-psnr",
            Metric::CpSsim => "cp-ssim",
        }
    }

    pub fn needs_weight_map(self) -> bool {
        !matches!(self, Metric::Psnr | Metric::Ssim)
    }

    pub fn is_content_based(self) -> bool {
        matches!(self, Metric::CpPsnr | Metric::CpSsim)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown metric `{s}`")))
    }
}

/// Inputs a metric may need beyond the two sequences.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScoringContext<'a> {
    pub weight_map: Option<&'a WeightMap>,
    pub model: Option<&'a ForestModel>,
    /// Precomputed directions for content-based metrics; predicted with `model` when absent.
    pub trajectory: Option<&'a Trajectory>,
    pub seed: u64,
    pub gaze: GazeConfig,
}

/// Provenance echoed in JSON reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub weight_map_id: Option<String>,
    pub model_id: Option<String>,
    pub seed: Option<u64>,
    pub viewport_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub config: ReportConfig,
}

impl MetricReport {
    pub fn new(metric: Metric, scores: Vec<f64>, config: ReportConfig) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::arg("report needs at least one frame score"));
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        Ok(Self {
            metric,
            scores,
            mean,
            config,
        })
    }

    /// `frame_index,score` rows followed by `mean,<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,score\n");
        for (i, s) in self.scores.iter().enumerate() {
            out.push_str(&format!("{i},{s}\n"));
        }
        out.push_str(&format!("mean,{}\n", self.mean));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Short content hash identifying a weight map in reports.
pub fn weight_map_id(w: &WeightMap) -> String {
    let bytes = encode_grid(w.width(), w.height(), w.weights()).expect("weight map dimensions are valid");
    short_digest(&bytes)
}

/// Scores every frame pair with `metric` and averages.
///
/// Content-based metrics follow one viewing trajectory: the one supplied in
/// `ctx`, or one predicted on the distorted sequence with `ctx.model`.
pub fn score_sequence<R: FrameSource, D: FrameSource>(
    reference: &mut R,
    distorted: &mut D,
    metric: Metric,
    ctx: &ScoringContext,
) -> Result<MetricReport> {
    let n = reference.frame_count();
    if n != distorted.frame_count() {
        return Err(Error::data(format!(
            "frame count mismatch: reference has {n}, distorted has {}",
            distorted.frame_count()
        )));
    }
    if n == 0 {
        return Err(Error::data("sequences contain no frames"));
    }
    let weights = if metric.needs_weight_map() {
        Some(ctx.weight_map.ok_or_else(|| {
            Error::arg(format!("metric {metric} needs a weight map"))
        })?)
    } else {
        None
    };

    let mut config = ReportConfig {
        weight_map_id: weights.map(weight_map_id),
        model_id: None,
        seed: None,
        viewport_size: None,
    };
    let predicted;
    let trajectory = if metric.is_content_based() {
        let t = match ctx.trajectory {
            Some(t) => t,
            None => {
                let model = ctx
                    .model
                    .ok_or_else(|| Error::arg(format!("metric {metric} needs a model or a trajectory")))?;
                config.model_id = Some(model_id(model));
                config.seed = Some(ctx.seed);
                config.viewport_size = Some(ctx.gaze.viewport_size);
                predicted = predict_trajectory(distorted, model, ctx.seed, &ctx.gaze)?;
                &predicted
            }
        };
        if t.len() != n {
            return Err(Error::data(format!(
                "trajectory has {} directions for {n} frames",
                t.len()
            )));
        }
        Some(t)
    } else {
        None
    };

    let mut scores = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + FRAME_BATCH).min(n);
        let mut pairs = Vec::with_capacity(end - start);
        for t in start..end {
            pairs.push((t, reference.read_frame(t)?, distorted.read_frame(t)?));
        }
        let batch: Vec<f64> = pairs
            .par_iter()
            .map(|(t, r, d)| score_frame(r, d, metric, weights, trajectory.map(|tr| tr.directions()[*t])))
            .collect::<Result<_>>()?;
        scores.extend(batch);
        start = end;
    }
    MetricReport::new(metric, scores, config)
}

fn score_frame(
    r: &Frame,
    d: &Frame,
    metric: Metric,
    weights: Option<&WeightMap>,
    dir: Option<SphereDirection>,
) -> Result<f64> {
    let w = || weights.expect("weight map checked");
    match metric {
        Metric::Psnr => psnr(r, d),
        Metric::Ssim => mean_ssim(r, d),
        Metric::NcpPsnr => ncp_psnr(r, d, w()),
        Metric::NcpSsim => weighted_ssim(r, d, w()),
        Metric::CpPsnr => cp_psnr(r, d, w(), dir.expect("trajectory checked")),
        Metric::CpSsim => {
            let mask = viewport_binary_map(dir.expect("trajectory checked"), w().width(), w().height())?;
            weighted_ssim(r, d, &cp_weight_map(w(), &mask)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Frame {
        Frame::from_luma(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
    }

    fn random_weights(rng: &mut ChaCha8Rng, w: usize, h: usize) -> WeightMap {
        let v = (0..w * h).map(|_| rng.gen::<f64>()).collect();
        WeightMap::from_weights(w, h, v).unwrap().normalize().unwrap()
    }

    #[test]
    fn weighted_mse_basics() {
        let a = vec![10u8; 16];
        let w = WeightMap::uniform(4, 4);
        assert_eq!(weighted_mse(&a, &a, &w).unwrap(), 0.0);
        let b = vec![12u8; 16];
        assert!((weighted_mse(&a, &b, &w).unwrap() - 4.0).abs() < 1e-12);
        assert!(weighted_mse(&a, &b[..15], &w).is_err());
    }

    #[test]
    fn weighted_mse_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (random_frame(&mut rng, 4, 4), random_frame(&mut rng, 4, 4));
        let w = random_weights(&mut rng, 4, 4);
        let mut expected = 0.0;
        for t in 1..=4 {
            for s in 1..=4 {
                let i = (t - 1) * 4 + (s - 1);
                let e = a.luma()[i] as f64 - b.luma()[i] as f64;
                expected += e * e * w.get(s, t);
            }
        }
        assert!((weighted_mse(a.luma(), b.luma(), &w).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_frames_cap() {
        let f = Frame::filled(16, 16, 77, 128, 128).unwrap();
        let w = WeightMap::uniform(16, 16);
        assert_eq!(psnr(&f, &f).unwrap(), PSNR_CAP_DB);
        assert_eq!(ncp_psnr(&f, &f, &w).unwrap(), PSNR_CAP_DB);
        assert_eq!(cp_psnr(&f, &f, &w, SphereDirection::new(100.0, -40.0).unwrap()).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn constant_error_any_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Frame::filled(8, 8, 100, 128, 128).unwrap();
        let b = Frame::filled(8, 8, 116, 128, 128).unwrap();
        let expected = 10.0 * (255.0f64 * 255.0 / 256.0).log10();
        assert!((expected - 24.05).abs() < 0.01);
        let w = random_weights(&mut rng, 8, 8);
        assert!((ncp_psnr(&a, &b, &w).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn uniform_weights_reduce_to_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = WeightMap::uniform(32, 16);
        for _ in 0..5 {
            let (a, b) = (random_frame(&mut rng, 32, 16), random_frame(&mut rng, 32, 16));
            assert!((ncp_psnr(&a, &b, &w).unwrap() - psnr(&a, &b).unwrap()).abs() < 1e-6);
            assert!((weighted_ssim(&a, &b, &w).unwrap() - mean_ssim(&a, &b).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_mse_is_linear_in_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (random_frame(&mut rng, 8, 8), random_frame(&mut rng, 8, 8));
        let (w1, w2) = (random_weights(&mut rng, 8, 8), random_weights(&mut rng, 8, 8));
        let lambda = 0.3;
        let mix: Vec<f64> = w1
            .weights()
            .iter()
            .zip(w2.weights())
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        let wm = WeightMap::from_weights(8, 8, mix).unwrap();
        let lhs = weighted_mse(a.luma(), b.luma(), &wm).unwrap();
        let rhs = lambda * weighted_mse(a.luma(), b.luma(), &w1).unwrap()
            + (1.0 - lambda) * weighted_mse(a.luma(), b.luma(), &w2).unwrap();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn scaling_errors_lowers_psnr() {
        let a = Frame::filled(16, 16, 100, 128, 128).unwrap();
        let mut luma = vec![100u8; 256];
        luma[5] = 110;
        luma[77] = 95;
        let b = Frame::from_luma(16, 16, luma.clone()).unwrap();
        let luma2: Vec<u8> = luma.iter().map(|&v| (100 + (v as i32 - 100) * 2) as u8).collect();
        let c = Frame::from_luma(16, 16, luma2).unwrap();
        let w = WeightMap::uniform(16, 16);
        assert!(psnr(&a, &c).unwrap() < psnr(&a, &b).unwrap());
        assert!(ncp_psnr(&a, &c, &w).unwrap() < ncp_psnr(&a, &b, &w).unwrap());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_frame(&mut rng, 32, 32);
        let map = ssim_map(a.luma(), a.luma(), 32, 32).unwrap();
        assert!(map.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let inv: Vec<u8> = a.luma().iter().map(|v| 255 - v).collect();
        let map = ssim_map(a.luma(), &inv, 32, 32).unwrap();
        assert!(map.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(map.iter().sum::<f64>() / (map.len() as f64) < 0.2);
        assert!(ssim_map(&[0; 100], &[0; 100], 10, 10).is_err());
    }

    #[test]
    fn point_mass_weight_gives_local_ssim() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b) = (random_frame(&mut rng, 16, 16), random_frame(&mut rng, 16, 16));
        let mut v = vec![0.0; 256];
        v[37] = 1.0;
        let w = WeightMap::from_weights(16, 16, v).unwrap();
        let map = ssim_map(a.luma(), b.luma(), 16, 16).unwrap();
        assert_eq!(weighted_ssim(&a, &b, &w).unwrap(), map[37]);
        let w = random_weights(&mut rng, 16, 16);
        assert!((weighted_ssim(&a, &a, &w).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflect_is_symmetric() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
    }

    #[test]
    fn sequence_report() {
        let f = Frame::filled(16, 16, 50, 128, 128).unwrap();
        let mut r = vec![f.clone(); 3];
        let mut d = vec![f; 3];
        let report = score_sequence(&mut r, &mut d, Metric::Psnr, &ScoringContext::default()).unwrap();
        assert_eq!(report.scores, vec![100.0; 3]);
        assert_eq!(report.mean, 100.0);
        assert_eq!(report.to_csv(), "frame_index,score\n0,100\n1,100\n2,100\nmean,100\n");
        let mut short = vec![Frame::filled(16, 16, 50, 128, 128).unwrap(); 2];
        assert!(score_sequence(&mut r, &mut short, Metric::Psnr, &ScoringContext::default()).is_err());
        let mut d2 = r.clone();
        assert!(score_sequence(&mut r, &mut d2, Metric::NcpPsnr, &ScoringContext::default()).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("vmaf".parse::<Metric>().is_err());
    }
}
