use serde::{Deserialize, Serialize};

use super::{Result, SceneWindow, TrajError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    X,
    Y,
    Heading,
    Speed,
    Distance,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [Self::X, Self::Y, Self::Heading, Self::Speed, Self::Distance];

    /// Output interval of the min-max map.
    pub fn target_range(self) -> (f64, f64) {
        match self {
            Self::X | Self::Y | Self::Heading => (-1.0, 1.0),
            Self::Speed | Self::Distance => (0.0, 1.0),
        }
    }
}

/// Observed `[min, max]` of one feature and its target interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FeatureRange {
    pub fn new(kind: FeatureKind, min: f64, max: f64) -> Result<Self> {
        if !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(TrajError::DegenerateFeature(kind));
        }
        let (lo, hi) = kind.target_range();
        Ok(Self { min, max, lo, hi })
    }

    /// Slope of the affine map.
    #[inline]
    pub fn gain(&self) -> f64 {
        (self.hi - self.lo) / (self.max - self.min)
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        self.lo + (v - self.min) * self.gain()
    }

    #[inline]
    pub fn invert(&self, s: f64) -> f64 {
        self.min + (s - self.lo) / self.gain()
    }
}

/// Min-max scaler for node features and spatial edge distances.
///
/// Values outside the fitted range extrapolate linearly. Temporal edge
/// attributes are never scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub x: FeatureRange,
    pub y: FeatureRange,
    pub heading: FeatureRange,
    pub speed: FeatureRange,
    pub distance: FeatureRange,
}

impl FeatureScaler {
    pub fn range(&self, kind: FeatureKind) -> &FeatureRange {
        match kind {
            FeatureKind::X => &self.x,
            FeatureKind::Y => &self.y,
            FeatureKind::Heading => &self.heading,
            FeatureKind::Speed => &self.speed,
            FeatureKind::Distance => &self.distance,
        }
    }

    pub fn apply(&self, kind: FeatureKind, value: f64) -> f64 {
        self.range(kind).apply(value)
    }

    pub fn invert(&self, kind: FeatureKind, value: f64) -> f64 {
        self.range(kind).invert(value)
    }

    /// Scales an `(x, y, theta, v)` node feature vector.
    pub fn apply_node(&self, f: [f64; 4]) -> [f64; 4] {
        [self.x.apply(f[0]), self.y.apply(f[1]), self.heading.apply(f[2]), self.speed.apply(f[3])]
    }
}

/// Fits a scaler on the graph-visible part of the training windows.
///
/// Node features come from every history point that would become a graph
/// node (the ego, and actors within `sensing_radius` of it). Distances come
/// from every same-step pair of such points that lies within the radius.
pub fn fit_scaler(train_windows: &[SceneWindow], sensing_radius: f64) -> Result<FeatureScaler> {
    let mut acc = [(f64::INFINITY, f64::NEG_INFINITY); 5];
    let mut push = |i: usize, v: f64| {
        acc[i].0 = acc[i].0.min(v);
        acc[i].1 = acc[i].1.max(v);
    };
    let mut nodes: Vec<&crate::traj::TrackPoint> = Vec::new();
    for w in train_windows {
        for row in &w.history {
            let Some(ego) = row.iter().find(|p| p.vehicle_id == w.ego_id) else { continue };
            nodes.clear();
            nodes.extend(row.iter().filter(|p| {
                p.vehicle_id == w.ego_id || (p.x - ego.x).hypot(p.y - ego.y) <= sensing_radius
            }));
            for p in &nodes {
                push(0, p.x);
                push(1, p.y);
                push(2, p.theta);
                push(3, p.v);
            }
            for (i, a) in nodes.iter().enumerate() {
                for b in &nodes[i + 1..] {
                    let d = (a.x - b.x).hypot(a.y - b.y);
                    if d <= sensing_radius {
                        push(4, d);
                    }
                }
            }
        }
    }
    let r = |i: usize| FeatureRange::new(FeatureKind::ALL[i], acc[i].0, acc[i].1);
    Ok(FeatureScaler { x: r(0)?, y: r(1)?, heading: r(2)?, speed: r(3)?, distance: r(4)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj::TrackPoint;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    fn window(rows: Vec<Vec<(u64, f64, f64, f64, f64)>>) -> SceneWindow {
        SceneWindow {
            ego_id: 0,
            dt: 0.2,
            history_len: rows.len(),
            future_len: 1,
            start_frame: 0,
            history: rows
                .into_iter()
                .map(|r| {
                    r.into_iter()
                        .map(|(id, x, y, theta, v)| TrackPoint { vehicle_id: id, frame_index: 0, x, y, theta, v })
                        .collect()
                })
                .collect(),
            future: BTreeMap::new(),
        }
    }

    #[test]
    fn examples() {
        let x = FeatureRange::new(FeatureKind::X, -50.0, 50.0).unwrap();
        assert_eq!(x.apply(50.0), 1.0);
        assert_eq!(x.apply(-50.0), -1.0);
        let v = FeatureRange::new(FeatureKind::Speed, 0.0, 30.0).unwrap();
        assert_eq!(v.apply(15.0), 0.5);
        // extrapolates instead of clamping
        assert_eq!(v.apply(60.0), 2.0);
    }

    #[test]
    fn degenerate_is_error() {
        assert!(matches!(FeatureRange::new(FeatureKind::Y, 1.0, 1.0), Err(TrajError::DegenerateFeature(FeatureKind::Y))));
        // all headings equal
        let w = window(vec![vec![(0, 0.0, 0.0, 0.3, 1.0), (1, 10.0, 1.0, 0.3, 2.0)]]);
        assert!(matches!(fit_scaler(&[w], 50.0), Err(TrajError::DegenerateFeature(FeatureKind::Heading))));
    }

    #[test]
    fn fit_respects_radius_and_covers_training_values() {
        let w = window(vec![
            vec![(0, 0.0, 0.0, 0.0, 10.0), (1, 20.0, 0.0, 0.5, 12.0), (2, 80.0, 0.0, 3.0, 99.0)],
            vec![(0, 2.0, 1.0, -0.1, 11.0), (1, 22.0, -3.0, 0.4, 13.0)],
        ]);
        let s = fit_scaler(&[w.clone()], 50.0).unwrap();
        assert_eq!(s.x.max, 22.0);
        assert_eq!(s.speed.max, 13.0);
        assert_eq!(s.distance.max, 416f64.sqrt());
        for p in w.history.iter().flatten().filter(|p| p.vehicle_id != 2) {
            let f = s.apply_node([p.x, p.y, p.theta, p.v]);
            for (k, val) in FeatureKind::ALL[..4].iter().zip(f) {
                let (lo, hi) = k.target_range();
                assert!(val >= lo - 1e-12 && val <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_1000_random_values() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for kind in FeatureKind::ALL {
            let r = FeatureRange::new(kind, -37.5, 81.25).unwrap();
            for _ in 0..1000 {
                let v: f64 = rng.random_range(-500.0..500.0);
                let back = r.invert(r.apply(v));
                assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0), "{v} -> {back}");
            }
        }
    }

    proptest! {
        #[test]
        fn apply_invert_identity(min in -1e3..1e3f64, span in 1.0..1e3f64, v in -1e4..1e4f64) {
            let r = FeatureRange::new(FeatureKind::Speed, min, min + span).unwrap();
            let back = r.invert(r.apply(v));
            prop_assert!((back - v).abs() <= 1e-9 * v.abs().max(min.abs()).max(1.0));
        }
    }
}
