use super::metrics::Trajectory;
use crate::traj::{SceneWindow, TrackPoint};

/// Linear extrapolation from the present point.
///
/// With a previous point the last-step displacement is repeated; without one
/// the step is `v * dt` along heading `theta`.
pub fn cv_extrapolate(previous: Option<&TrackPoint>, current: &TrackPoint, dt: f64, horizon: usize) -> Trajectory {
    let step = match previous {
        Some(p) => [current.x - p.x, current.y - p.y],
        None => [current.v * dt * current.theta.cos(), current.v * dt * current.theta.sin()],
    };
    (1..=horizon)
        .map(|k| [current.x + k as f64 * step[0], current.y + k as f64 * step[1]])
        .collect()
}

/// Constant-velocity forecast for every non-ego actor present at the last
/// history step, sorted by actor id.
pub fn cv_baseline_predict(window: &SceneWindow, horizon: usize) -> Vec<(u64, Trajectory)> {
    let k = window.history_len;
    window
        .current_actors()
        .map(|p| {
            let prev = if k >= 2 { window.point_at(k - 1, p.vehicle_id) } else { None };
            (p.vehicle_id, cv_extrapolate(prev, p, window.dt, horizon))
        })
        .collect()
}
