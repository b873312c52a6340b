mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use samgp::complexity::MeasureKind;
use samgp::data::StandardizationStats;
use samgp::evolution::{evaluate, EvalContext, EvolutionConfig};
use samgp::inference::{
    self, ensemble_predict, nearest, r2, reduce_sharpness_eval, Member, ModelBundle, PredictionBounds, SnapshotTree,
    BUNDLE_FORMAT, BUNDLE_VERSION,
};
use samgp::rng::seeded;
use samgp::tree::{Individual, TreeInitializer};

fn members(seed: u64, count: usize, x: &DMatrix<f64>, y: &[f64]) -> Vec<Member> {
    let cfg = EvolutionConfig { measure: MeasureKind::Pp.into(), ..Default::default() };
    let ctx = EvalContext::new(&cfg, x, y);
    let mut r = seeded(seed);
    let mut init = TreeInitializer::new(x.ncols(), 1, 4);
    (0..count)
        .map(|i| {
            let mut ind = Individual::new((0..1 + i % 3).map(|_| init.generate(&mut r)).collect());
            let f = evaluate(&ind, &ctx);
            ind.set_fitness(f);
            Member::from_individual(&ind, x).unwrap()
        })
        .collect()
}

fn fresh_rows(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = seeded(seed);
    DMatrix::from_fn(n, p, |_, _| r.random_range(-3.0..3.0))
}

#[test]
fn reduction_is_exact_on_training_inputs() {
    let d = common::synthetic(50, 3, 1);
    for m in members(2, 12, &d.features, &d.target) {
        let plain = m.features(&d.features, false).unwrap();
        let reduced = m.features(&d.features, true).unwrap();
        assert_eq!(plain, reduced);
    }
}

#[test]
fn every_reduced_node_output_is_a_stored_value() {
    let d = common::synthetic(40, 3, 3);
    let x = fresh_rows(30, 3, 4);
    for m in members(5, 12, &d.features, &d.target) {
        for snap in &m.trees {
            for p in 0..snap.tree.len() {
                let Some(stored) = &snap.stored[p] else { continue };
                let end = snap.tree.subtree_end(p);
                let sub = SnapshotTree { tree: snap.tree.subtree(p), stored: snap.stored[p..end].to_vec() };
                for v in sub.evaluate_reduced(&x).unwrap() {
                    assert!(stored.contains(&v), "{v} not stored at node {p} of {}", snap.tree);
                }
            }
            let col = snap.evaluate_reduced(&x).unwrap();
            for i in 0..x.nrows() {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                assert_eq!(reduce_sharpness_eval(snap, &row), col[i]);
            }
        }
    }
}

#[test]
fn bounded_predictions_stay_in_range() {
    let d = common::synthetic(40, 3, 6);
    let bounds = PredictionBounds::from_targets(&d.target);
    assert!(bounds.y_min <= bounds.y_max);
    let x = fresh_rows(200, 3, 7).map(|v| v * 50.0);
    for m in members(8, 10, &d.features, &d.target) {
        for reduction in [false, true] {
            for v in m.predict(&x, reduction, Some(&bounds)).unwrap() {
                assert!((bounds.y_min..=bounds.y_max).contains(&v));
            }
        }
    }
}

#[test]
fn ensemble_is_the_member_mean() {
    let d = common::synthetic(60, 4, 9);
    let ms = members(10, 5, &d.features, &d.target);
    let x = fresh_rows(25, 4, 11);
    let got = ensemble_predict(&ms, &x, true, None).unwrap();
    let each: Vec<Vec<f64>> = ms.iter().map(|m| m.predict(&x, true, None).unwrap()).collect();
    for i in 0..x.nrows() {
        let mean = each.iter().map(|p| p[i]).sum::<f64>() / 5.0;
        assert!((got[i] - mean).abs() < 1e-12);
    }
    let same = vec![ms[0].clone(); 4];
    assert_eq!(
        ensemble_predict(&same, &x, true, None).unwrap(),
        ms[0].predict(&x, true, None).unwrap()
    );
}

#[test]
fn bundle_round_trips_through_json() {
    let d = common::synthetic(50, 3, 12);
    let bundle = ModelBundle {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        variable_names: d.names.clone(),
        target_name: d.target_name.clone(),
        input_stats: StandardizationStats::fit(&d.features),
        target_stats: StandardizationStats::fit_vector(&d.target),
        reduction: true,
        bounds: Some(PredictionBounds::from_targets(&d.target)),
        members: members(13, 3, &d.features, &d.target),
    };
    let back = ModelBundle::from_json(&bundle.to_json().unwrap()).unwrap();
    assert_eq!(back, bundle);
    let x = fresh_rows(20, 3, 14);
    assert_eq!(back.predict(&x).unwrap(), bundle.predict(&x).unwrap());

    let mut wrong = bundle.clone();
    wrong.version = BUNDLE_VERSION + 1;
    assert!(ModelBundle::from_json(&wrong.to_json().unwrap()).is_err());
    assert!(bundle.predict(&fresh_rows(3, 2, 1)).is_err());
}

#[test]
fn r2_reference_values() {
    let y = [1.0, 2.0, 3.0];
    assert_eq!(r2(&y, &y), 1.0);
    assert_eq!(r2(&y, &[2.0, 2.0, 2.0]), 0.0);
    assert_eq!(r2(&y, &[1.0, 2.0, 5.0]), -1.0);
    assert_eq!(inference::r2(&[4.0, 4.0], &[1.0, 2.0]), 0.0);
}

proptest! {
    #[test]
    fn nearest_picks_a_closest_member(mut v in prop::collection::vec(-100.0f64..100.0, 1..50), q in -150.0f64..150.0) {
        v.sort_by(f64::total_cmp);
        let got = nearest(&v, q);
        prop_assert!(v.contains(&got));
        let best = v.iter().map(|s| (s - q).abs()).fold(f64::INFINITY, f64::min);
        prop_assert_eq!((got - q).abs(), best);
    }
}
