use std::collections::BTreeMap;

use omnivqa::eval::{pcc, srcc};
use omnivqa::gaze::{FeatureVector, ForestModel, ForestParams, Node, Tree};
use omnivqa::media_io::{decode_grid, encode_grid, model_from_json, model_to_json, parse_traces, write_traces};
use omnivqa::metrics::{mse, weighted_mse};
use omnivqa::scores::{rescale, z_scores};
use omnivqa::sphere::{
    angular_distance, direction_to_viewport_point, region_of, viewport_contains,
    viewport_point_to_direction, Region, SphereDirection,
};
use omnivqa::weight::WeightMap;
use proptest::prelude::*;

fn direction() -> impl Strategy<Value = SphereDirection> {
    (-180.0..=180.0f64, -90.0..=90.0f64).prop_map(|(lon, lat)| SphereDirection::new(lon, lat).unwrap())
}

fn tree(depth: u32) -> impl Strategy<Value = Vec<Node>> {
    let leaf = (0.0..=1.0f64).prop_map(|p| vec![Node::Leaf { posterior: p }]);
    leaf.prop_recursive(depth, 64, 2, |inner| {
        (0..5usize, -10.0..10.0f64, inner.clone(), inner).prop_map(|(feature, threshold, l, r)| {
            let shift = |nodes: Vec<Node>, by: usize| {
                nodes.into_iter().map(move |n| match n {
                    Node::Split { feature, threshold, left, right } => Node::Split {
                        feature,
                        threshold,
                        left: left + by,
                        right: right + by,
                    },
                    leaf => leaf,
                })
            };
            let ln = l.len();
            let mut out = vec![Node::Split { feature, threshold, left: 1, right: 1 + ln }];
            out.extend(shift(l, 1));
            out.extend(shift(r, 1 + ln));
            out
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn viewport_projection_round_trip(c in direction(), x in 0.0..512.0f64, y in 0.0..512.0f64) {
        let d = viewport_point_to_direction(c, 512, x, y);
        prop_assert!(viewport_contains(c, d));
        let (bx, by) = direction_to_viewport_point(c, 512, d).unwrap();
        prop_assert!((bx - x).abs() < 1e-7 && (by - y).abs() < 1e-7);
    }

    #[test]
    fn viewport_never_contains_far_directions(c in direction(), d in direction()) {
        if viewport_contains(c, d) {
            prop_assert!(angular_distance(c, d) <= 0.75f64.acos().to_degrees() + 1e-9);
        }
        if angular_distance(c, d) <= 29.99 {
            prop_assert!(viewport_contains(c, d));
        }
    }

    #[test]
    fn region_is_dominant_axis(d in direction()) {
        let [x, y, z] = d.unit_vector();
        let r = region_of(d);
        let score = |r: Region| match r {
            Region::Front => x, Region::Left => y, Region::Back => -x,
            Region::Right => -y, Region::Top => z, Region::Bottom => -z,
        };
        for other in Region::ALL {
            prop_assert!(score(r) >= score(other));
        }
    }

    #[test]
    fn wrapped_directions_are_valid(lon in -2000.0..2000.0f64, lat in -200.0..200.0f64) {
        let d = SphereDirection::wrapped(lon, lat);
        prop_assert!(SphereDirection::new(d.longitude(), d.latitude()).is_ok());
        let k = ((d.longitude() - lon) / 360.0).round();
        prop_assert!((d.longitude() - lon - 360.0 * k).abs() < 1e-9);
    }

    #[test]
    fn srcc_bounded_symmetric_and_rank_based(
        x in prop::collection::vec(-50.0..50.0f64, 3..40),
        seed in any::<u64>(),
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 0.3 + ((seed >> (i % 60)) & 7) as f64).collect();
        let (Ok(r), Ok(rr)) = (srcc(&x, &y), srcc(&y, &x)) else { return Ok(()); };
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(r, rr);
        let stretched: Vec<f64> = y.iter().map(|v| 3.0 * v + 11.0).collect();
        prop_assert_eq!(srcc(&x, &stretched).unwrap(), r);
        let p = pcc(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&p));
    }

    #[test]
    fn z_scores_standardize_each_subject(rows in prop::collection::vec(prop::collection::vec(0.0..100.0f64, 4), 2..6)) {
        let mut table = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            let m: BTreeMap<String, f64> = row.iter().enumerate().map(|(j, &v)| (format!("q{j}"), v)).collect();
            table.insert(format!("s{i}"), m);
        }
        match z_scores(&table) {
            Ok(z) => {
                for row in z.z().values() {
                    let v: Vec<f64> = row.values().copied().collect();
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
                    prop_assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
                    for a in v {
                        prop_assert!((rescale(a) - (100.0 * (a + 3.0) / 6.0)).abs() < 1e-12);
                    }
                }
            }
            Err(_) => prop_assert!(rows.iter().any(|r| r.iter().all(|&v| v == r[0]))),
        }
    }

    #[test]
    fn uniform_weighted_mse_is_mse(a in prop::collection::vec(any::<u8>(), 48), b in prop::collection::vec(any::<u8>(), 48)) {
        let w = WeightMap::uniform(8, 6);
        prop_assert!((weighted_mse(&a, &b, &w).unwrap() - mse(&a, &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn grid_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let values: Vec<f64> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) as f64).sqrt() - 3.5).collect();
        let (dw, dh, dv) = decode_grid(&encode_grid(w, h, &values).unwrap()).unwrap();
        prop_assert_eq!((dw, dh), (w, h));
        prop_assert_eq!(dv, values);
    }

    #[test]
    fn traces_round_trip(samples in prop::collection::vec((0u64..500, direction()), 1..40)) {
        let mut text = String::from("# sample_rate=30\nsubject_id,sequence_id,sample_index,longitude_deg,latitude_deg\n");
        let mut seen = std::collections::BTreeSet::new();
        for (k, d) in &samples {
            if seen.insert(*k) {
                text.push_str(&format!("a,b,{k},{},{}\n", d.longitude(), d.latitude()));
            }
        }
        let set = parse_traces(&text, "p").unwrap();
        let mut buf = Vec::new();
        write_traces(&set, &mut buf).unwrap();
        let again = parse_traces(std::str::from_utf8(&buf).unwrap(), "p").unwrap();
        prop_assert_eq!(again, set);
    }

    #[test]
    fn model_json_round_trip(trees in prop::collection::vec(tree(5), 1..6), probe in prop::array::uniform5(-12.0..12.0f64)) {
        let trees: Vec<Tree> = trees.into_iter().map(|n| Tree::new(n).unwrap()).collect();
        let model = ForestModel::new(trees, ForestParams::default()).unwrap();
        let back = model_from_json(&model_to_json(&model)).unwrap();
        let f = FeatureVector::from_values(probe).unwrap();
        prop_assert_eq!(back.posterior(&f), model.posterior(&f));
        prop_assert_eq!(back, model);
    }
}
