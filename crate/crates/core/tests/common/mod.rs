#![allow(dead_code)]

use std::collections::BTreeMap;

use aigem::traj::{FutureTrack, SceneWindow, TrackPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Window with the ego at the origin and `actors` vehicles scattered
/// uniformly within `spread` meters; every vehicle drifts a little each step.
pub fn random_window(seed: u64, actors: usize, history: usize, future: usize, spread: f64) -> SceneWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<u64> = (0..=actors as u64).collect();
    let mut pos: Vec<[f64; 2]> = ids
        .iter()
        .map(|&id| if id == 0 { [0.0, 0.0] } else { [rng.random_range(-spread..spread), rng.random_range(-spread..spread)] })
        .collect();
    let vel: Vec<[f64; 2]> = ids.iter().map(|_| [rng.random_range(0.5..2.0), rng.random_range(-0.3..0.3)]).collect();
    let mut steps = Vec::new();
    for f in 0..history + future {
        let row: Vec<TrackPoint> = ids
            .iter()
            .map(|&id| {
                let i = id as usize;
                TrackPoint {
                    vehicle_id: id,
                    frame_index: f as u64,
                    x: pos[i][0],
                    y: pos[i][1],
                    theta: vel[i][1].atan2(vel[i][0]),
                    v: vel[i][0].hypot(vel[i][1]) / 0.2,
                }
            })
            .collect();
        steps.push(row);
        for (p, v) in pos.iter_mut().zip(&vel) {
            p[0] += v[0];
            p[1] += v[1];
        }
    }
    let fut = steps.split_off(history);
    let futures: BTreeMap<u64, FutureTrack> = ids[1..]
        .iter()
        .map(|&id| {
            let points = fut.iter().map(|r| r[id as usize].position()).collect();
            (id, FutureTrack { points, complete: true })
        })
        .collect();
    SceneWindow { ego_id: 0, dt: 0.2, history_len: history, future_len: future, start_frame: 0, history: steps, future: futures }
}

/// Ego-frame windows from a generated scenario, every vehicle taking a turn
/// as the ego.
pub fn synth_windows(spec: &str, history: usize, future: usize, stride: Option<usize>) -> Vec<SceneWindow> {
    use aigem::traj::{segment_all, synth_generate, ScenarioSpec, SegmentOptions};
    let spec = ScenarioSpec::parse(spec).unwrap();
    let tracks = synth_generate(&spec).unwrap();
    let opts = SegmentOptions { history_len: history, future_len: future, stride, sensing_radius: None };
    segment_all(&tracks, None, &opts).unwrap()
}

/// Scene on a 5 m grid so that threshold distances (25 m, 50 m) occur
/// exactly through Pythagorean triples. Actors drop out at random steps.
pub fn grid_scene(rng: &mut ChaCha8Rng, history: usize) -> SceneWindow {
    let actors = rng.random_range(0..=10u64);
    let mut rows = Vec::with_capacity(history);
    for k in 0..history {
        let mut row = vec![TrackPoint { vehicle_id: 0, frame_index: k as u64, x: 0.0, y: 0.0, theta: 0.0, v: 10.0 }];
        for id in 1..=actors {
            if rng.random_bool(0.85) {
                let x = 5.0 * rng.random_range(-14..=14) as f64;
                let y = 5.0 * rng.random_range(-14..=14) as f64;
                row.push(TrackPoint { vehicle_id: id, frame_index: k as u64, x, y, theta: 0.1, v: 10.0 });
            }
        }
        rows.push(row);
    }
    SceneWindow {
        ego_id: 0,
        dt: 0.2,
        history_len: history,
        future_len: 1,
        start_frame: 0,
        history: rows,
        future: BTreeMap::new(),
    }
}
