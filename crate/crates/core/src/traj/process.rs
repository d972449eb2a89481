use std::f64::consts::PI;

use super::{Result, TrajError, VehicleTrack};

/// Displacements shorter than this (meters) do not define a heading.
pub const STATIONARY_EPS: f64 = 1e-6;

/// Maps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Keeps every `factor`-th frame and renumbers frames as `frame / factor`.
///
/// The phase is global (frames divisible by `factor` are kept) so tracks of
/// different vehicles stay aligned in time after resampling. A track whose
/// first frame is a multiple of `factor` keeps its first point.
pub fn downsample(tracks: &[VehicleTrack], factor: i64) -> Result<Vec<VehicleTrack>> {
    if factor <= 0 {
        return Err(TrajError::Argument(format!("downsample factor must be >= 1, got {factor}")));
    }
    let f = factor as u64;
    Ok(tracks
        .iter()
        .filter_map(|t| {
            let points: Vec<_> = t
                .points
                .iter()
                .filter(|p| p.frame_index % f == 0)
                .map(|p| {
                    let mut q = *p;
                    q.frame_index = p.frame_index / f;
                    q
                })
                .collect();
            (!points.is_empty()).then(|| VehicleTrack { vehicle_id: t.vehicle_id, dt: t.dt * factor as f64, points })
        })
        .collect())
}

/// Fills `theta` from consecutive displacements.
///
/// `theta_k = atan2(dy, dx)` of the step ending at `k`; a step shorter than
/// [`STATIONARY_EPS`] carries the previous heading. The first point copies
/// the second, and leading stationary points take the first defined heading.
/// A track that never moves keeps heading 0.
pub fn compute_headings(track: &VehicleTrack) -> Result<VehicleTrack> {
    let n = track.points.len();
    if n < 2 {
        return Err(TrajError::HeadingUndefined(track.vehicle_id));
    }
    let mut headings: Vec<Option<f64>> = vec![None; n];
    for k in 1..n {
        let (a, b) = (&track.points[k - 1], &track.points[k]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        headings[k] = if dx.hypot(dy) < STATIONARY_EPS {
            headings[k - 1]
        } else {
            Some(wrap_angle(dy.atan2(dx)))
        };
    }
    let first_defined = headings.iter().flatten().next().copied().unwrap_or(0.0);
    let mut out = track.clone();
    for (p, h) in out.points.iter_mut().zip(&headings) {
        p.theta = h.unwrap_or(first_defined);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj::TrackPoint;
    use proptest::prelude::*;

    fn track(xy: &[(f64, f64)]) -> VehicleTrack {
        VehicleTrack {
            vehicle_id: 1,
            dt: 0.1,
            points: xy
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| TrackPoint { vehicle_id: 1, frame_index: i as u64, x, y, theta: 0.0, v: 1.0 })
                .collect(),
        }
    }

    #[test]
    fn downsample_keeps_every_factor_th() {
        let t = track(&(0..10).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        let d = downsample(&[t.clone()], 2).unwrap();
        let xs: Vec<f64> = d[0].points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let frames: Vec<u64> = d[0].points.iter().map(|p| p.frame_index).collect();
        assert_eq!(frames, vec![0, 1, 2, 3, 4]);
        assert!((d[0].dt - 0.2).abs() < 1e-15);

        assert_eq!(downsample(&[t.clone()], 1).unwrap()[0], t);
        assert_eq!(downsample(&[t.clone()], 3).unwrap()[0].points.len(), 4);
        assert!(matches!(downsample(&[t.clone()], 0), Err(TrajError::Argument(_))));
        assert!(matches!(downsample(&[t], -2), Err(TrajError::Argument(_))));
    }

    #[test]
    fn heading_examples() {
        let h = compute_headings(&track(&[(0.0, 0.0), (1.0, 1.0)])).unwrap();
        assert!((h.points[1].theta - PI / 4.0).abs() < 1e-12);
        assert_eq!(h.points[0].theta, h.points[1].theta);

        let h = compute_headings(&track(&[(0.0, 0.0), (-1.0, 0.0)])).unwrap();
        assert!((h.points[1].theta - PI).abs() < 1e-12);

        // -0.0 lateral displacement still maps to +pi
        let h = compute_headings(&track(&[(0.0, 0.0), (-1.0, -0.0)])).unwrap();
        assert_eq!(h.points[1].theta, PI);
    }

    #[test]
    fn heading_stationary_then_moving() {
        // hand trace: step 2 has no displacement and no earlier heading;
        // step 3 moves +y (pi/2); steps 1 and 2 take the first defined heading.
        let h = compute_headings(&track(&[(0.0, 0.0), (0.0, 0.0), (0.0, 1.0)])).unwrap();
        let th: Vec<f64> = h.points.iter().map(|p| p.theta).collect();
        assert_eq!(th, vec![PI / 2.0; 3]);

        // carry: moving, stopping, moving again
        let h = compute_headings(&track(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 1.0)])).unwrap();
        let th: Vec<f64> = h.points.iter().map(|p| p.theta).collect();
        assert_eq!(th, vec![0.0, 0.0, 0.0, PI / 2.0]);
    }

    #[test]
    fn heading_single_point_errors() {
        assert!(matches!(compute_headings(&track(&[(0.0, 0.0)])), Err(TrajError::HeadingUndefined(1))));
    }

    proptest! {
        #[test]
        fn headings_in_half_open_range(pts in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..30)) {
            let h = compute_headings(&track(&pts)).unwrap();
            for p in &h.points {
                prop_assert!(p.theta > -PI && p.theta <= PI);
            }
        }

        #[test]
        fn wrap_angle_range(a in -50.0..50.0f64) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((a - w) / (2.0 * PI)).fract().abs() < 1e-9 || (1.0 - ((a - w) / (2.0 * PI)).fract().abs()) < 1e-9);
        }
    }
}
