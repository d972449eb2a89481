use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{FutureTrack, Result, SceneWindow, TrackPoint, TrajError, VehicleTrack};

/// Windowing parameters. `history_len` counts the present step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentOptions {
    pub history_len: usize,
    pub future_len: usize,
    /// Frames between consecutive window starts; `None` means non-overlapping.
    pub stride: Option<usize>,
    /// When set, history points farther than this from the ego at the same
    /// step are dropped, and futures are recorded only for actors inside it
    /// at the present step. Such points can never become graph nodes.
    pub sensing_radius: Option<f64>,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        // 3 s of history and 5 s of future at 0.2 s
        Self { history_len: 16, future_len: 25, stride: None, sensing_radius: None }
    }
}

impl SegmentOptions {
    pub fn window_len(&self) -> usize {
        self.history_len + self.future_len
    }

    pub fn effective_stride(&self) -> usize {
        self.stride.unwrap_or(self.window_len())
    }
}

type FrameIndex<'a> = HashMap<u64, BTreeMap<u64, &'a TrackPoint>>;

/// Cuts windows for one ego out of a set of time-aligned tracks.
///
/// Windows start at the ego's first frame and advance by the stride; a
/// candidate is skipped when the ego is missing from any of its frames.
pub fn segment_windows(tracks: &[VehicleTrack], ego_id: u64, opts: &SegmentOptions) -> Result<Vec<SceneWindow>> {
    if opts.history_len == 0 || opts.future_len == 0 {
        return Err(TrajError::Argument("history_len and future_len must be >= 1".into()));
    }
    if opts.effective_stride() == 0 {
        return Err(TrajError::Argument("stride must be >= 1".into()));
    }
    let ego_tracks: Vec<&VehicleTrack> = tracks.iter().filter(|t| t.vehicle_id == ego_id).collect();
    if ego_tracks.is_empty() {
        return Err(TrajError::UnknownEgo(ego_id));
    }
    let dt = ego_tracks[0].dt;

    // frame -> vehicle -> point
    let mut by_frame: FrameIndex = HashMap::new();
    for t in tracks {
        for p in &t.points {
            by_frame.entry(p.frame_index).or_default().insert(p.vehicle_id, p);
        }
    }

    let first = ego_tracks.iter().filter_map(|t| t.first_frame()).min().unwrap_or(0);
    let last = ego_tracks.iter().filter_map(|t| t.last_frame()).max().unwrap_or(0);
    let len = opts.window_len() as u64;
    let stride = opts.effective_stride() as u64;

    let mut windows = Vec::new();
    let mut start = first;
    while start + len - 1 <= last {
        if let Some(w) = cut(&by_frame, ego_id, dt, start, opts) {
            windows.push(w);
        }
        start += stride;
    }
    Ok(windows)
}

fn cut(by_frame: &FrameIndex, ego_id: u64, dt: f64, start: u64, opts: &SegmentOptions) -> Option<SceneWindow> {
    let ego_present = |f: u64| by_frame.get(&f).is_some_and(|m| m.contains_key(&ego_id));
    if !(start..start + opts.window_len() as u64).all(ego_present) {
        return None;
    }
    let in_range = |ego: &TrackPoint, p: &TrackPoint| match opts.sensing_radius {
        Some(r) => (p.x - ego.x).hypot(p.y - ego.y) <= r,
        None => true,
    };

    let mut history = Vec::with_capacity(opts.history_len);
    for k in 0..opts.history_len as u64 {
        let frame = &by_frame[&(start + k)];
        let ego = frame[&ego_id];
        history.push(
            frame
                .values()
                .filter(|p| p.vehicle_id == ego_id || in_range(ego, p))
                .map(|p| **p)
                .collect::<Vec<_>>(),
        );
    }

    let present = start + opts.history_len as u64 - 1;
    let mut future = BTreeMap::new();
    for p in history.last().into_iter().flatten().filter(|p| p.vehicle_id != ego_id) {
        let mut points = Vec::with_capacity(opts.future_len);
        for j in 1..=opts.future_len as u64 {
            match by_frame.get(&(present + j)).and_then(|m| m.get(&p.vehicle_id)) {
                Some(q) => points.push([q.x, q.y]),
                None => break,
            }
        }
        let complete = points.len() == opts.future_len;
        future.insert(p.vehicle_id, FutureTrack { points, complete });
    }

    Some(SceneWindow {
        ego_id,
        dt,
        history_len: opts.history_len,
        future_len: opts.future_len,
        start_frame: start,
        history,
        future,
    })
}

/// Translates every position so the ego sits at the origin at the present
/// step. Heading and speed are untouched.
pub fn to_ego_frame(window: &SceneWindow) -> Result<SceneWindow> {
    let ego = window
        .ego_current()
        .ok_or(TrajError::EgoMissing { ego_id: window.ego_id, step: window.history_len })?;
    let (ox, oy) = (ego.x, ego.y);
    let mut out = window.clone();
    for p in out.history.iter_mut().flatten() {
        p.x -= ox;
        p.y -= oy;
    }
    for f in out.future.values_mut() {
        for q in &mut f.points {
            q[0] -= ox;
            q[1] -= oy;
        }
    }
    Ok(out)
}

/// Segments the record once per ego and moves every window into its ego
/// frame. With `egos = None` every vehicle takes a turn as the ego, in id
/// order; windows of one ego stay in time order.
pub fn segment_all(tracks: &[VehicleTrack], egos: Option<&[u64]>, opts: &SegmentOptions) -> Result<Vec<SceneWindow>> {
    let ids: Vec<u64> = match egos {
        Some(e) => e.to_vec(),
        None => {
            let mut v: Vec<u64> = tracks.iter().map(|t| t.vehicle_id).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
    };
    let mut out = Vec::new();
    for id in ids {
        for w in segment_windows(tracks, id, opts)? {
            out.push(to_ego_frame(&w)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_track(id: u64, frames: std::ops::Range<u64>, x0: f64, y: f64, v: f64) -> VehicleTrack {
        VehicleTrack {
            vehicle_id: id,
            dt: 0.2,
            points: frames
                .map(|f| TrackPoint { vehicle_id: id, frame_index: f, x: x0 + v * 0.2 * f as f64, y, theta: 0.0, v })
                .collect(),
        }
    }

    #[test]
    fn default_lengths_follow_sampling_formulas() {
        let tau_h: f64 = 3.0;
        let tau_f: f64 = 5.0;
        let ts = 0.2;
        let o = SegmentOptions::default();
        assert_eq!(o.history_len, (tau_h / ts).round() as usize + 1);
        assert_eq!(o.future_len, (tau_f / ts).round() as usize);
        assert_eq!(o.window_len(), 41);
    }

    #[test]
    fn two_windows_from_82_steps() {
        let tracks = vec![line_track(1, 0..82, 0.0, 0.0, 10.0)];
        let w = segment_windows(&tracks, 1, &SegmentOptions::default()).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].start_frame, 0);
        assert_eq!(w[1].start_frame, 41);
        assert_eq!(w[0].history.len(), 16);
    }

    #[test]
    fn overlapping_stride_and_unknown_ego() {
        let tracks = vec![line_track(1, 0..50, 0.0, 0.0, 10.0)];
        let opts = SegmentOptions { stride: Some(3), ..Default::default() };
        // starts 0,3,6,9 fit in 50 frames (9 + 40 = 49)
        assert_eq!(segment_windows(&tracks, 1, &opts).unwrap().len(), 4);
        assert!(matches!(segment_windows(&tracks, 9, &opts), Err(TrajError::UnknownEgo(9))));
    }

    #[test]
    fn ego_gap_skips_window() {
        let mut t = line_track(1, 0..82, 0.0, 0.0, 10.0);
        t.points.retain(|p| p.frame_index != 60);
        let w = segment_windows(&[t], 1, &SegmentOptions::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start_frame, 0);
    }

    #[test]
    fn partial_presence_and_incomplete_futures() {
        let tracks = vec![
            line_track(1, 0..41, 0.0, 0.0, 10.0),
            // history steps 1..=10 only
            line_track(2, 0..10, 5.0, 3.7, 10.0),
            // present at K_H but leaves 5 steps into the future
            line_track(3, 0..21, -5.0, 3.7, 10.0),
            line_track(4, 0..41, 10.0, -3.7, 10.0),
        ];
        let w = &segment_windows(&tracks, 1, &SegmentOptions::default()).unwrap()[0];
        assert!(w.point_at(10, 2).is_some());
        assert!(w.point_at(11, 2).is_none());
        assert!(!w.future.contains_key(&2));
        assert!(!w.future.contains_key(&1), "ego is never a future target");
        assert!(!w.future[&3].complete);
        assert_eq!(w.future[&3].points.len(), 5);
        assert!(w.future[&4].complete);
        assert_eq!(w.future[&4].points.len(), 25);
    }

    #[test]
    fn sensing_radius_filters_points() {
        let tracks = vec![line_track(1, 0..41, 0.0, 0.0, 10.0), line_track(2, 0..41, 60.0, 0.0, 10.0)];
        let opts = SegmentOptions { sensing_radius: Some(50.0), ..Default::default() };
        let w = &segment_windows(&tracks, 1, &opts).unwrap()[0];
        assert!(w.history.iter().all(|row| row.len() == 1));
        assert!(w.future.is_empty());
    }

    #[test]
    fn ego_frame_translation() {
        let tracks = vec![line_track(1, 0..41, 100.0, 50.0, 0.0), line_track(2, 0..41, 110.0, 50.0, 0.0)];
        let w = &segment_windows(&tracks, 1, &SegmentOptions::default()).unwrap()[0];
        let e = to_ego_frame(w).unwrap();
        assert_eq!(e.ego_current().unwrap().position(), [0.0, 0.0]);
        assert_eq!(e.point_at(16, 2).unwrap().position(), [10.0, 0.0]);
        assert_eq!(e.future[&2].points[0], [10.0, 0.0]);
        assert_eq!(to_ego_frame(&e).unwrap(), e);
    }
}
