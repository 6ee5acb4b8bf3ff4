use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::features::{extract_features, FeatureVector};
use super::GazeConfig;
use crate::error::{Error, Result};
use crate::media_io::Frame;
use crate::saliency::{pqft_saliency, SaliencyMap};
use crate::sphere::{render_viewport, viewport_point_to_direction, SphereDirection, ViewportImage};

const MIN_SPREAD: f64 = 0.5;
const MAX_SHIFT_ITERATIONS: usize = 500;

/// A possible next viewing direction: the center of one salient cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub direction: SphereDirection,
    /// Position in viewport pixels, origin at the top-left corner.
    pub viewport_point: (f64, f64),
    /// Cluster standard deviation in viewport pixels.
    pub spread: f64,
    pub features: Option<FeatureVector>,
}

/// Draws `n` pixel centers from the discrete distribution `s`.
pub fn sample_points(s: &SaliencyMap, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let size = s.size();
    let mut cdf = Vec::with_capacity(size * size);
    let mut acc = 0.0;
    for &v in s.values() {
        acc += v;
        cdf.push(acc);
    }
    let last_positive = s.values().iter().rposition(|&v| v > 0.0).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(last_positive);
            ((idx % size) as f64 + 0.5, (idx / size) as f64 + 0.5)
        })
        .collect()
}

/// One mean-shift cluster: its mode and the indices of its member points.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub mode: (f64, f64),
    pub members: Vec<usize>,
}

struct WeightedPoints {
    xy: Vec<(f64, f64)>,
    weight: Vec<f64>,
    cell: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl WeightedPoints {
    fn cell_of(&self, p: (f64, f64)) -> (i64, i64) {
        ((p.0 / self.cell).floor() as i64, (p.1 / self.cell).floor() as i64)
    }

    /// Gaussian-weighted mean around `p` (cut off at `cutoff`) and the kernel mass.
    fn shift(&self, p: (f64, f64), bandwidth: f64, cutoff: f64) -> ((f64, f64), f64) {
        let (cx, cy) = self.cell_of(p);
        let inv = -0.5 / (bandwidth * bandwidth);
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                let Some(ids) = self.grid.get(&(gx, gy)) else { continue };
                for &i in ids {
                    let (x, y) = self.xy[i];
                    let d2 = (x - p.0) * (x - p.0) + (y - p.1) * (y - p.1);
                    if d2 <= cutoff * cutoff {
                        let w = self.weight[i] * (d2 * inv).exp();
                        sx += w * x;
                        sy += w * y;
                        sw += w;
                    }
                }
            }
        }
        if sw > 0.0 {
            ((sx / sw, sy / sw), sw)
        } else {
            (p, 0.0)
        }
    }
}

/// Gaussian-kernel mean shift with bin seeding.
///
/// Seeds are the centroids of occupied `bandwidth/2` bins; modes closer than
/// `bandwidth/2` are merged (denser mode wins) and every point joins its
/// nearest surviving mode.
pub fn mean_shift(points: &[(f64, f64)], bandwidth: f64) -> Result<Vec<Cluster>> {
    if points.is_empty() {
        return Err(Error::arg("mean shift needs at least one point"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::arg(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    if let Some(p) = points.iter().find(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::arg(format!("non-finite point {p:?}")));
    }
    let cutoff = 3.0 * bandwidth;

    let mut index_of: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut point_slot = Vec::with_capacity(points.len());
    let mut xy = Vec::new();
    let mut weight = Vec::new();
    for &(x, y) in points {
        let slot = *index_of.entry((x.to_bits(), y.to_bits())).or_insert_with(|| {
            xy.push((x, y));
            weight.push(0.0);
            xy.len() - 1
        });
        weight[slot] += 1.0;
        point_slot.push(slot);
    }
    let mut data = WeightedPoints {
        xy,
        weight,
        cell: cutoff,
        grid: HashMap::new(),
    };
    for i in 0..data.xy.len() {
        let key = data.cell_of(data.xy[i]);
        data.grid.entry(key).or_default().push(i);
    }

    let bin = bandwidth / 2.0;
    let mut bins: BTreeMap<(i64, i64), (f64, f64, f64)> = BTreeMap::new();
    for (i, &(x, y)) in data.xy.iter().enumerate() {
        let e = bins
            .entry(((x / bin).floor() as i64, (y / bin).floor() as i64))
            .or_insert((0.0, 0.0, 0.0));
        e.0 += data.weight[i] * x;
        e.1 += data.weight[i] * y;
        e.2 += data.weight[i];
    }
    let seeds: Vec<(f64, f64)> = bins.values().map(|&(sx, sy, w)| (sx / w, sy / w)).collect();

    let tol = 1e-4 * bandwidth;
    let converged: Vec<((f64, f64), f64)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut p = seed;
            for _ in 0..MAX_SHIFT_ITERATIONS {
                let (next, _) = data.shift(p, bandwidth, cutoff);
                let moved = ((next.0 - p.0).powi(2) + (next.1 - p.1).powi(2)).sqrt();
                p = next;
                if moved < tol {
                    break;
                }
            }
            let (_, density) = data.shift(p, bandwidth, cutoff);
            (p, density)
        })
        .collect();

    let mut order: Vec<usize> = (0..converged.len()).collect();
    order.sort_by(|&a, &b| converged[b].1.total_cmp(&converged[a].1).then(a.cmp(&b)));
    let merge2 = (bandwidth / 2.0).powi(2);
    let mut modes: Vec<(f64, f64)> = Vec::new();
    for i in order {
        let m = converged[i].0;
        if modes
            .iter()
            .all(|k| (k.0 - m.0).powi(2) + (k.1 - m.1).powi(2) > merge2)
        {
            modes.push(m);
        }
    }

    let nearest: Vec<usize> = data
        .xy
        .iter()
        .map(|&(x, y)| {
            let mut best = (0, f64::INFINITY);
            for (k, m) in modes.iter().enumerate() {
                let d2 = (m.0 - x).powi(2) + (m.1 - y).powi(2);
                if d2 < best.1 {
                    best = (k, d2);
                }
            }
            best.0
        })
        .collect();
    let mut members = vec![Vec::new(); modes.len()];
    for (i, slot) in point_slot.iter().enumerate() {
        members[nearest[*slot]].push(i);
    }
    Ok(modes
        .into_iter()
        .zip(members)
        .filter(|(_, m)| !m.is_empty())
        .map(|(mode, members)| Cluster { mode, members })
        .collect())
}

fn candidate_at(
    point: (f64, f64),
    spread: f64,
    saliency: &SaliencyMap,
    viewport: &ViewportImage,
) -> Result<Candidate> {
    let features = extract_features(point, spread, saliency, viewport)?;
    Ok(Candidate {
        direction: viewport_point_to_direction(viewport.center(), viewport.size(), point.0, point.1),
        viewport_point: point,
        spread,
        features: Some(features),
    })
}

/// Candidates (with features) from an already computed saliency map of `viewport`.
pub fn candidates_from_saliency(
    saliency: &SaliencyMap,
    viewport: &ViewportImage,
    seed: u64,
    config: &GazeConfig,
) -> Result<Vec<Candidate>> {
    let size = saliency.size() as f64;
    if saliency.is_uniform() {
        let c = size / 2.0;
        return Ok(vec![candidate_at((c, c), size / 12f64.sqrt(), saliency, viewport)?]);
    }
    let points = sample_points(saliency, config.sample_count, seed);
    let clusters = mean_shift(&points, config.bandwidth_fraction * size)?;
    let min_members = config.min_cluster_fraction * points.len() as f64;
    let mut kept: Vec<&Cluster> = clusters
        .iter()
        .filter(|c| c.members.len() as f64 >= min_members)
        .collect();
    if kept.is_empty() {
        let largest = clusters
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.members.len().cmp(&b.1.members.len()).then(b.0.cmp(&a.0)))
            .map(|(_, c)| c)
            .expect("mean shift returns at least one cluster");
        kept.push(largest);
    }
    kept.into_iter()
        .map(|cluster| {
            let n = cluster.members.len() as f64;
            let (mut mx, mut my) = (0.0, 0.0);
            for &i in &cluster.members {
                mx += points[i].0;
                my += points[i].1;
            }
            mx /= n;
            my /= n;
            let mut var = 0.0;
            for &i in &cluster.members {
                var += (points[i].0 - mx).powi(2) + (points[i].1 - my).powi(2);
            }
            let spread = (var / (2.0 * n)).sqrt().max(MIN_SPREAD);
            candidate_at((mx, my), spread, saliency, viewport)
        })
        .collect()
}

/// Renders the viewport at `current`, computes its saliency and clusters it into candidates.
pub fn extract_candidates(
    frame: &Frame,
    previous: Option<&Frame>,
    current: SphereDirection,
    seed: u64,
    config: &GazeConfig,
) -> Result<Vec<Candidate>> {
    config.validate()?;
    let viewport = render_viewport(frame, current, config.viewport_size)?;
    let prev_viewport = previous
        .map(|p| render_viewport(p, current, config.viewport_size))
        .transpose()?;
    let saliency = pqft_saliency(&viewport, prev_viewport.as_ref())?;
    candidates_from_saliency(&saliency, &viewport, seed, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::viewport_contains;

    fn point_mass(size: usize, x: usize, y: usize) -> SaliencyMap {
        let mut v = vec![0.0; size * size];
        v[y * size + x] = 1.0;
        SaliencyMap::from_values(size, v).unwrap()
    }

    #[test]
    fn point_mass_sampling() {
        let pts = sample_points(&point_mass(64, 10, 20), 500, 1);
        assert!(pts.iter().all(|&p| p == (10.5, 20.5)));
        let pts = sample_points(&point_mass(64, 63, 63), 500, 1);
        assert!(pts.iter().all(|&p| p == (63.5, 63.5)));
    }

    #[test]
    fn uniform_quadrants() {
        let n = 10_000;
        let pts = sample_points(&SaliencyMap::uniform(64), n, 7);
        let mut counts = [0usize; 4];
        for (x, y) in pts {
            counts[(x >= 32.0) as usize + 2 * (y >= 32.0) as usize] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn sampling_deterministic() {
        let s = SaliencyMap::uniform(64);
        assert_eq!(sample_points(&s, 100, 9), sample_points(&s, 100, 9));
        assert_ne!(sample_points(&s, 100, 9), sample_points(&s, 100, 10));
    }

    #[test]
    fn identical_points_single_cluster() {
        let c = mean_shift(&vec![(3.0, 4.0); 50], 2.0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].mode, (3.0, 4.0));
        assert_eq!(c[0].members.len(), 50);
    }

    #[test]
    fn two_blobs() {
        let h = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = Vec::new();
        for &(cx, cy) in &[(10.0, 10.0), (30.0, 10.0)] {
            for _ in 0..200 {
                pts.push((cx + rng.gen_range(-0.3..0.3), cy + rng.gen_range(-0.3..0.3)));
            }
        }
        let clusters = mean_shift(&pts, h).unwrap();
        assert_eq!(clusters.len(), 2);
        for c in &clusters {
            let n = c.members.len() as f64;
            let mx = c.members.iter().map(|&i| pts[i].0).sum::<f64>() / n;
            let my = c.members.iter().map(|&i| pts[i].1).sum::<f64>() / n;
            assert!(((c.mode.0 - mx).powi(2) + (c.mode.1 - my).powi(2)).sqrt() < h / 4.0);
        }
        let total: usize = clusters.iter().map(|c| c.members.len()).sum();
        assert_eq!(total, pts.len());
    }

    #[test]
    fn mean_shift_rejects_bad_input() {
        assert!(mean_shift(&[], 1.0).is_err());
        assert!(mean_shift(&[(0.0, 0.0)], 0.0).is_err());
    }

    fn dot_frame(w: usize, h: usize, dots: &[(usize, usize)]) -> Frame {
        let mut luma = vec![60u8; w * h];
        for &(s, t) in dots {
            for y in t.saturating_sub(2)..(t + 2).min(h) {
                for x in s.saturating_sub(2)..(s + 2).min(w) {
                    luma[y * w + x] = 255;
                }
            }
        }
        Frame::from_luma(w, h, luma).unwrap()
    }

    fn config() -> GazeConfig {
        GazeConfig {
            viewport_size: 128,
            ..GazeConfig::default()
        }
    }

    #[test]
    fn single_dot_one_central_candidate() {
        let frame = dot_frame(720, 360, &[(360, 180)]);
        let cands = extract_candidates(&frame, None, SphereDirection::FRONT, 3, &config()).unwrap();
        assert_eq!(cands.len(), 1, "{cands:?}");
        let (x, y) = cands[0].viewport_point;
        assert!(((x - 64.0).powi(2) + (y - 64.0).powi(2)).sqrt() < 5.0);
    }

    #[test]
    fn two_dots_two_candidates() {
        // about ±15° of longitude apart at the equator
        let frame = dot_frame(720, 360, &[(330, 180), (390, 180)]);
        let cands = extract_candidates(&frame, None, SphereDirection::FRONT, 3, &config()).unwrap();
        assert_eq!(cands.len(), 2, "{cands:?}");
        let lons: Vec<f64> = cands.iter().map(|c| c.direction.longitude()).collect();
        assert!(lons.iter().any(|l| (l - 15.0).abs() < 3.0), "{lons:?}");
        assert!(lons.iter().any(|l| (l + 15.0).abs() < 3.0), "{lons:?}");
    }

    #[test]
    fn constant_frame_central_candidate() {
        let frame = Frame::filled(360, 180, 80, 128, 128).unwrap();
        let center = SphereDirection::new(40.0, 10.0).unwrap();
        let cands = extract_candidates(&frame, None, center, 0, &config()).unwrap();
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].viewport_point, (64.0, 64.0));
        assert!(cands[0].spread > 0.0);
    }

    #[test]
    fn candidates_inside_viewport_and_deterministic() {
        let frame = dot_frame(720, 360, &[(100, 100), (500, 250), (650, 60)]);
        let center = SphereDirection::new(-30.0, 20.0).unwrap();
        let a = extract_candidates(&frame, None, center, 11, &config()).unwrap();
        let b = extract_candidates(&frame, None, center, 11, &config()).unwrap();
        assert_eq!(a, b);
        for c in &a {
            assert!(viewport_contains(center, c.direction));
            assert!(c.spread > 0.0);
        }
    }
}
