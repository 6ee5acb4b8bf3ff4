use omnivqa::sphere::{angular_distance, direction_to_pixel, pixel_to_direction, viewport_contains, SphereDirection};
use omnivqa::weight::{direction_probability_map, gmm_density, ncp_weight_map, parse_gmm_params, resample_weight_map, GmmParams, WeightMap};

fn brute_force(w: usize, h: usize, p: &GmmParams) -> Vec<f64> {
    let dirs: Vec<SphereDirection> = (1..=h)
        .flat_map(|t| (1..=w).map(move |s| pixel_to_direction(s, t, w, h).unwrap()))
        .collect();
    let raw: Vec<f64> = dirs
        .iter()
        .map(|&d| {
            dirs.iter()
                .filter(|&&c| viewport_contains(c, d))
                .map(|&c| gmm_density(c, p))
                .fold(0.0, f64::max)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn assert_matches(map: &WeightMap, oracle: &[f64]) {
    for (i, (a, b)) in map.weights().iter().zip(oracle).enumerate() {
        assert!((a - b).abs() <= 1e-9, "pixel {i}: {a} vs {b}");
    }
}

#[test]
fn off_center_mixture_matches_brute_force() {
    let p = parse_gmm_params(
        "axis,k,a,b,c\n\
         longitude,1,0.02,57,20\nlongitude,2,0.01,-100,35\nlongitude,3,0.001,170,60\n\
         latitude,1,0.03,25,12\nlatitude,2,0.01,-40,30\nlatitude,3,0.002,0,80\n",
    )
    .unwrap();
    for (w, h) in [(24, 12), (31, 17), (50, 26)] {
        let map = ncp_weight_map(w, h, &p).unwrap();
        assert_matches(&map, &brute_force(w, h, &p));
    }
}

#[test]
fn default_mixture_matches_brute_force_at_odd_sizes() {
    let p = GmmParams::default();
    for (w, h) in [(19, 9), (45, 23)] {
        assert_matches(&ncp_weight_map(w, h, &p).unwrap(), &brute_force(w, h, &p));
    }
}

#[test]
fn resolution_stability() {
    let p = GmmParams::default();
    let coarse = resample_weight_map(&ncp_weight_map(360, 180, &p).unwrap(), 720, 360).unwrap();
    let fine = ncp_weight_map(720, 360, &p).unwrap();
    let worst = coarse
        .weights()
        .iter()
        .zip(fine.weights())
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    assert!(worst <= 0.02, "max relative difference {worst}");
}

#[test]
fn probability_map_peaks_at_the_mixture_mode() {
    let (w, h) = (360, 180);
    let p = GmmParams::default();
    let v = direction_probability_map(w, h, &p).unwrap();
    let (i, _) = v
        .weights()
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
    let peak = pixel_to_direction(i % w + 1, i / w + 1, w, h).unwrap();
    assert!(angular_distance(peak, SphereDirection::FRONT) <= 10.0, "{peak:?}");

    let argmax_axis = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        let steps = ((hi - lo) * 1000.0) as usize;
        (0..=steps)
            .map(|k| lo + k as f64 / 1000.0)
            .fold((lo, f64::MIN), |b, x| if f(x) > b.1 { (x, f(x)) } else { b })
            .0
    };
    let mode = SphereDirection::new(
        argmax_axis(&|x| p.longitude_mixture(x), -180.0, 180.0),
        argmax_axis(&|x| p.latitude_mixture(x), -90.0, 90.0),
    )
    .unwrap();
    let (ms, mt) = direction_to_pixel(mode, w, h);
    assert_eq!((i % w + 1, i / w + 1), (ms.round() as usize, mt.round() as usize), "mode {mode:?}");

    let ncp = ncp_weight_map(w, h, &p).unwrap();
    let (fs, ft) = direction_to_pixel(SphereDirection::FRONT, w, h);
    let front = ncp.get(fs.round() as usize, ft.round() as usize);
    assert!(front > ncp.get(1, ft.round() as usize));
    assert!(front > ncp.get(fs.round() as usize, 1));
}

#[test]
fn large_frame_uses_upsampled_pool() {
    let p = GmmParams::default();
    let map = ncp_weight_map(1000, 500, &p).unwrap();
    assert!((map.sum() - 1.0).abs() <= 1e-9);
    assert!(map.is_normalized());
    let row = &map.weights()[250 * 1000..251 * 1000];
    let left = row[..500].iter().sum::<f64>();
    let right = row[500..].iter().sum::<f64>();
    assert!(left > 0.0 && right > 0.0);
}
