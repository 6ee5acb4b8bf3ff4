mod common;

use omnivqa::gaze::{
    predict_direction, train_forest, Candidate, FeatureVector, ForestModel, ForestParams, LabeledRow, Node, Tree,
};
use omnivqa::media_io::{model_from_json, model_to_json};
use omnivqa::sphere::SphereDirection;
use rand::Rng;

fn random_features(rng: &mut impl Rng) -> FeatureVector {
    FeatureVector::from_values([
        rng.gen_range(0.0..0.7),
        rng.gen_range(-180.0..180.0),
        rng.gen_range(0.0..0.3),
        rng.gen_range(0.0..0.001),
        rng.gen_range(0.0..0.5),
    ])
    .unwrap()
}

fn candidates(rng: &mut impl Rng, n: usize) -> Vec<Candidate> {
    (0..n)
        .map(|_| {
            let direction = SphereDirection::new(rng.gen_range(-40.0..40.0), rng.gen_range(-30.0..30.0)).unwrap();
            Candidate {
                direction,
                viewport_point: (0.0, 0.0),
                spread: 1.0,
                features: Some(random_features(rng)),
            }
        })
        .collect()
}

fn map_leaves(model: &ForestModel, f: impl Fn(f64) -> f64) -> ForestModel {
    let trees = model
        .trees()
        .iter()
        .map(|t| {
            let nodes = t
                .nodes()
                .iter()
                .map(|n| match *n {
                    Node::Leaf { posterior } => Node::Leaf { posterior: f(posterior) },
                    split => split,
                })
                .collect();
            Tree::new(nodes).unwrap()
        })
        .collect();
    ForestModel::new(trees, *model.params()).unwrap()
}

fn trained(rng: &mut impl Rng, trees: usize) -> ForestModel {
    let rows: Vec<LabeledRow> = (0..400)
        .map(|_| {
            let features = random_features(rng);
            LabeledRow {
                positive: features.distance() < 0.2 && features.local_contrast() > 0.1,
                features,
            }
        })
        .collect();
    train_forest(&rows, &ForestParams { tree_count: trees, seed: 4, ..ForestParams::default() }).unwrap()
}

#[test]
fn single_tree_argmax_survives_monotone_leaf_transform() {
    let mut rng = common::seeded(31);
    let model = trained(&mut rng, 1);
    let squashed = map_leaves(&model, |p| p * p * p);
    for _ in 0..200 {
        let c = candidates(&mut rng, 6);
        assert_eq!(
            predict_direction(&model, &c, SphereDirection::FRONT).unwrap(),
            predict_direction(&squashed, &c, SphereDirection::FRONT).unwrap()
        );
    }
}

#[test]
fn forest_argmax_survives_affine_leaf_transform() {
    let mut rng = common::seeded(32);
    let model = trained(&mut rng, 15);
    let affine = map_leaves(&model, |p| 0.25 + 0.5 * p);
    for _ in 0..200 {
        let c = candidates(&mut rng, 8);
        assert_eq!(
            predict_direction(&model, &c, SphereDirection::FRONT).unwrap(),
            predict_direction(&affine, &c, SphereDirection::FRONT).unwrap()
        );
    }
}

#[test]
fn hundred_tree_model_round_trips_exactly() {
    let mut rng = common::seeded(33);
    let model = trained(&mut rng, 100);
    let back = model_from_json(&model_to_json(&model)).unwrap();
    assert_eq!(back, model);
    for _ in 0..1000 {
        let f = random_features(&mut rng);
        assert_eq!(back.posterior(&f).to_bits(), model.posterior(&f).to_bits());
    }
}

#[test]
fn equal_posteriors_prefer_the_nearer_candidate() {
    let constant = ForestModel::new(vec![Tree::constant(0.4).unwrap()], ForestParams::default()).unwrap();
    let mut rng = common::seeded(34);
    let c = candidates(&mut rng, 5);
    let current = c[3].direction;
    assert_eq!(predict_direction(&constant, &c, current).unwrap(), current);
}
