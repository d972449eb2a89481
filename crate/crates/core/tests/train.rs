mod common;

use std::collections::BTreeMap;

use aigem::graph::GraphConfig;
use aigem::traj::{fit_scaler, FutureTrack, SceneWindow, TrackPoint};
use aigem::train::*;
use proptest::prelude::*;

const LANE_CHANGE: &str = "duration = 40\nseed = 3\nlanes = 3\nrandom_vehicles = 6\nlane_change_fraction = 0.5\n";

fn tiny_config() -> TrainConfig {
    TrainConfig { epochs: 3, batch_size: 4, hidden: 16, mlp_hidden: vec![16, 8], horizon: 5, ..Default::default() }
}

fn lane_change_windows() -> Vec<SceneWindow> {
    common::synth_windows(LANE_CHANGE, 16, 25, None)
}

#[test]
fn perfect_predictions_score_zero() {
    let windows = lane_change_windows();
    let r = evaluate(&GroundTruth, &windows, &GraphConfig::default(), 25).unwrap();
    assert_eq!((r.ade, r.fde), (0.0, 0.0));
    assert_eq!(r.rmse_per_second, vec![0.0; 5]);
    assert_eq!(r.bucket_total(), r.actors);
}

#[test]
fn constant_offset_scores_exactly_five() {
    let truths: Vec<Trajectory> = (0..4).map(|a| (0..25).map(|k| [a as f64 * 3.0, k as f64 * 0.7]).collect()).collect();
    let preds: Vec<Trajectory> = truths.iter().map(|t| t.iter().map(|p| [p[0] + 3.0, p[1] - 4.0]).collect()).collect();
    assert_eq!(ade(&preds, &truths).unwrap(), 5.0);
    assert_eq!(fde(&preds, &truths).unwrap(), 5.0);
    for k in 1..=25 {
        assert_eq!(rmse_at(&preds, &truths, k).unwrap(), 5.0);
    }
}

fn trajectories(actors: usize, steps: usize) -> impl Strategy<Value = (Vec<Trajectory>, Vec<Trajectory>)> {
    let point = || (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| [x, y]);
    let traj = move || prop::collection::vec(point(), steps);
    (prop::collection::vec(traj(), actors), prop::collection::vec(traj(), actors))
}

proptest! {
    #[test]
    fn metrics_are_invariant_to_actor_order(
        (preds, truths) in (1usize..6, 1usize..8).prop_flat_map(|(a, s)| trajectories(a, s)),
        rot in 0usize..6,
    ) {
        let n = preds.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let p2: Vec<Trajectory> = perm.iter().map(|&i| preds[i].clone()).collect();
        let t2: Vec<Trajectory> = perm.iter().map(|&i| truths[i].clone()).collect();
        let k = truths[0].len();
        prop_assert!((ade(&preds, &truths).unwrap() - ade(&p2, &t2).unwrap()).abs() < 1e-9);
        prop_assert!((fde(&preds, &truths).unwrap() - fde(&p2, &t2).unwrap()).abs() < 1e-9);
        prop_assert!((rmse_at(&preds, &truths, k).unwrap() - rmse_at(&p2, &t2, k).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ade_lies_between_step_means(
        (preds, truths) in (1usize..6, 1usize..8).prop_flat_map(|(a, s)| trajectories(a, s)),
    ) {
        let k = truths[0].len();
        let step_mean = |s: usize| {
            let e: f64 = preds.iter().zip(&truths).map(|(p, t)| (p[s][0] - t[s][0]).hypot(p[s][1] - t[s][1])).sum();
            e / preds.len() as f64
        };
        let means: Vec<f64> = (0..k).map(step_mean).collect();
        let a = ade(&preds, &truths).unwrap();
        let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= lo - 1e-9 && a <= hi + 1e-9);
        prop_assert!((fde(&preds, &truths).unwrap() - means[k - 1]).abs() < 1e-9);
    }
}

#[test]
fn constant_velocity_baseline_is_exact_on_constant_velocity_traffic() {
    let spec = "duration = 30\nseed = 2\nrandom_vehicles = 9\nlane_change_fraction = 0\ncar_following_fraction = 0\n";
    let windows = common::synth_windows(spec, 16, 25, Some(10));
    let r = evaluate(&ConstantVelocity, &windows, &GraphConfig::default(), 25).unwrap();
    assert!(r.actors > 0);
    assert!(r.ade < 1e-9, "ade {}", r.ade);
}

fn bucket_fixture() -> SceneWindow {
    let pt = |id: u64, x: f64, y: f64, theta: f64| TrackPoint { vehicle_id: id, frame_index: 0, x, y, theta, v: 0.0 };
    let theta = std::f64::consts::FRAC_PI_2;
    // ego heads along +y, so longitudinal offset is the y coordinate
    let row = vec![pt(0, 0.0, 0.0, theta), pt(1, 3.0, 20.0, 0.0), pt(2, -2.0, -15.0, 0.0), pt(3, 1.0, -30.0, 0.0), pt(4, 0.0, 15.0, 0.0)];
    let future = (1..=4)
        .map(|id| {
            let p = row[id as usize].position();
            (id, FutureTrack { points: vec![p; 5], complete: true })
        })
        .collect::<BTreeMap<_, _>>();
    SceneWindow { ego_id: 0, dt: 0.2, history_len: 1, future_len: 5, start_frame: 0, history: vec![row], future }
}

#[test]
fn buckets_follow_ego_heading_with_inclusive_mid() {
    let w = bucket_fixture();
    let targets = eval_targets(&w, &GraphConfig::default(), 5).unwrap();
    let buckets: Vec<(u64, PositionBucket)> = targets.iter().map(|t| (t.actor_id, position_bucket(t.longitudinal))).collect();
    assert_eq!(
        buckets,
        vec![(1, PositionBucket::Front), (2, PositionBucket::Mid), (3, PositionBucket::Rear), (4, PositionBucket::Mid)]
    );
    let r = position_bucket_eval(&GroundTruth, &[w], &GraphConfig::default(), 5).unwrap();
    assert_eq!(r.front.unwrap().actors, 1);
    assert_eq!(r.mid.unwrap().actors, 2);
    assert_eq!(r.rear.unwrap().actors, 1);
}

#[test]
fn empty_bucket_is_absent() {
    let mut w = bucket_fixture();
    w.history[0].retain(|p| p.vehicle_id != 3);
    w.future.remove(&3);
    let r = evaluate(&ConstantVelocity, &[w], &GraphConfig::default(), 5).unwrap();
    assert!(r.buckets.rear.is_none());
    assert_eq!(r.bucket_total(), r.actors);
    assert_eq!(r.rmse_per_second.len(), 1);
}

#[test]
fn training_is_deterministic_and_returns_the_best_validation_epoch() {
    let windows = lane_change_windows();
    let (train_w, val_w) = windows.split_at(16);
    let scaler = fit_scaler(train_w, 50.0).unwrap();
    let cfg = TrainConfig { epochs: 4, ..tiny_config() };
    let a = train::<f64>(&cfg, train_w, val_w, &scaler).unwrap();
    let b = train::<f64>(&cfg, train_w, val_w, &scaler).unwrap();
    assert_eq!(a.curves, b.curves);
    assert_eq!(a.model, b.model);
    assert_eq!(a.curves.len(), 4);
    let best = a.curves.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(a.curves[a.best_epoch - 1].val_loss, best);
    assert!(best <= a.curves.last().unwrap().val_loss);

    let other = train::<f64>(&TrainConfig { seed: 1, ..cfg }, train_w, val_w, &scaler).unwrap();
    assert_ne!(a.curves, other.curves);
}

#[test]
fn trained_model_round_trips_through_a_checkpoint() {
    let windows = lane_change_windows();
    let scaler = fit_scaler(&windows, 50.0).unwrap();
    let out = train::<f64>(&TrainConfig { epochs: 1, ..tiny_config() }, &windows[..8], &windows[8..12], &scaler).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    out.model.save(&path).unwrap();
    let back = TrainedModel::<f64>::load(&path).unwrap();
    assert_eq!(back, out.model);
    let g = out.model.graph;
    let r1 = evaluate(&out.model, &windows[12..], &g, 5).unwrap();
    let r2 = evaluate(&back, &windows[12..], &g, 5).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.param_count, Some(out.model.params.param_count()));
}

#[test]
fn divergence_is_reported() {
    let windows = lane_change_windows();
    let scaler = fit_scaler(&windows, 50.0).unwrap();
    let cfg = TrainConfig { learning_rate: 1e300, epochs: 3, ..tiny_config() };
    match train::<f64>(&cfg, &windows[..8], &windows[8..], &scaler) {
        Err(TrainError::Divergence { .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|o| o.curves)),
    }
}

#[test]
fn config_validation() {
    for bad in [
        TrainConfig { learning_rate: 0.0, ..Default::default() },
        TrainConfig { epochs: 0, ..Default::default() },
        TrainConfig { horizon: 7, ..Default::default() },
        TrainConfig { d_min: -1.0, ..Default::default() },
        TrainConfig { lr_decay: 1.5, ..Default::default() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
    TrainConfig::default().validate().unwrap();
    let windows = lane_change_windows();
    let scaler = fit_scaler(&windows, 50.0).unwrap();
    assert!(train::<f64>(&tiny_config(), &windows, &[], &scaler).is_err());
}

#[test]
fn ablation_tables_have_one_row_per_setting() {
    let windows = lane_change_windows();
    let scaler = fit_scaler(&windows[..12], 50.0).unwrap();
    let data = AblationData { train: &windows[..12], val: &windows[12..16], test: &windows[16..], scaler: &scaler };
    let base = TrainConfig { epochs: 1, ..tiny_config() };
    let t = ablate_dmin(&base, &[0.0, 25.0, 50.0], &data).unwrap();
    assert_eq!(t.rows.len(), 3);
    assert_eq!(t.rows[0].actor_actor_edges, 0);
    assert!(t.rows[2].actor_actor_edges >= t.rows[1].actor_actor_edges);
    assert!(t.rows.iter().all(|r| r.rmse_per_second.len() == 1));
    let c = ablate_concat(&base, &data).unwrap();
    assert_eq!(c.rows.iter().map(|r| r.head_input_dim).collect::<Vec<_>>(), vec![18, 16]);
    let mut csv = Vec::new();
    c.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}
