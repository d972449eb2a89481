mod common;

use aigem::traj::{
    compute_headings, downsample, ingest_ngsim_reader, segment_all, synth_generate, LengthUnit, ScenarioSpec,
    SegmentOptions,
};
use proptest::prelude::*;

/// NGSIM-style CSV at 10 Hz with `vehicles` cars on straight lanes, each
/// starting at a different frame.
fn recording(vehicles: u32, frames: u32, offsets: &[u32]) -> String {
    let mut s = String::from("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel\n");
    for id in 1..=vehicles {
        let start = 1 + offsets[id as usize % offsets.len()];
        let speed = 30.0 + 4.0 * id as f64;
        for f in start..start + frames {
            let t = f as f64 * 0.1;
            let x = 12.0 * (id % 3) as f64 + 2.0 * (t * 0.4 + id as f64).sin();
            let y = 40.0 * id as f64 + speed * t;
            s.push_str(&format!("{id},{f},{x},{y},{speed}\n"));
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn downsampled_windows_are_evenly_spaced_and_ego_centred(
        vehicles in 2u32..6,
        offsets in prop::collection::vec(0u32..9, 1..4),
        stride in prop::option::of(1usize..12),
    ) {
        let csv = recording(vehicles, 160, &offsets);
        let tracks = ingest_ngsim_reader(csv.as_bytes(), LengthUnit::Feet).unwrap();
        let tracks: Vec<_> = downsample(&tracks, 2).unwrap().iter().map(|t| compute_headings(t).unwrap()).collect();
        let opts = SegmentOptions { history_len: 16, future_len: 25, stride, sensing_radius: None };
        let windows = segment_all(&tracks, None, &opts).unwrap();
        prop_assert!(!windows.is_empty());
        for w in &windows {
            prop_assert_eq!(w.dt, 0.2);
            prop_assert_eq!(w.history.len(), 16);
            for (k, row) in w.history.iter().enumerate() {
                prop_assert!(row.iter().all(|p| p.frame_index == w.start_frame + k as u64));
                prop_assert!(row.iter().all(|p| p.theta > -std::f64::consts::PI && p.theta <= std::f64::consts::PI));
            }
            let ego = w.ego_current().unwrap();
            prop_assert_eq!((ego.x, ego.y), (0.0, 0.0));
            prop_assert!(!w.future.contains_key(&w.ego_id));
        }
    }

    #[test]
    fn synthetic_windows_put_the_ego_at_the_origin(seed in 0u64..500, vehicles in 2usize..10) {
        let spec = ScenarioSpec::parse(&format!(
            "duration = 16\nseed = {seed}\nrandom_vehicles = {vehicles}\nnoise_std = 0.05\nlane_change_fraction = 0.4\n"
        ))
        .unwrap();
        let tracks = synth_generate(&spec).unwrap();
        let opts = SegmentOptions { stride: Some(7), ..Default::default() };
        for w in segment_all(&tracks, None, &opts).unwrap() {
            let ego = w.ego_current().unwrap();
            prop_assert_eq!((ego.x, ego.y), (0.0, 0.0));
            prop_assert_eq!(w.future_len, 25);
            prop_assert!(w.future.values().all(|f| f.points.len() <= 25));
        }
    }
}

#[test]
fn synthetic_generation_is_deterministic() {
    let text = "duration = 30\nseed = 9\nrandom_vehicles = 7\nnoise_std = 0.1\nlane_change_fraction = 0.5\n";
    let a = common::synth_windows(text, 16, 25, Some(5));
    let b = common::synth_windows(text, 16, 25, Some(5));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}
