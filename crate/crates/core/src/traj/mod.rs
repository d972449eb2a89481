//! Trajectory data: ingestion, synthesis, resampling, windowing, ego frame,
//! scaling and dataset splits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod ngsim;
mod process;
mod scaler;
mod split;
pub mod synth;
mod window;

pub use ngsim::{ingest_ngsim_csv, ingest_ngsim_reader, LengthUnit, FEET_TO_METERS};
pub use process::{compute_headings, downsample, wrap_angle, STATIONARY_EPS};
pub use scaler::{fit_scaler, FeatureKind, FeatureRange, FeatureScaler};
pub use split::{split_dataset, split_indices, SplitIndices, DEFAULT_FRACTIONS};
pub use synth::{synth_generate, ScenarioSpec};
pub use window::{segment_all, segment_windows, to_ego_frame, SegmentOptions};

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("format error: {0}")]
    Format(String),
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("vehicle {vehicle_id}: {message}")]
    Data { vehicle_id: u64, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("vehicle {0}: heading undefined for a single-point track")]
    HeadingUndefined(u64),
    #[error("ego vehicle {0} not found")]
    UnknownEgo(u64),
    #[error("ego vehicle {ego_id} missing at history step {step}")]
    EgoMissing { ego_id: u64, step: usize },
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("feature {0:?} is degenerate (max == min) in the training split")]
    DegenerateFeature(FeatureKind),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrajError>;

/// One kinematic sample of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub vehicle_id: u64,
    pub frame_index: u64,
    pub x: f64,
    pub y: f64,
    /// Heading in radians, in (-pi, pi].
    pub theta: f64,
    /// Speed in m/s, non-negative.
    pub v: f64,
}

impl TrackPoint {
    #[inline]
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// A run of consecutive frames of one vehicle sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrack {
    pub vehicle_id: u64,
    pub dt: f64,
    pub points: Vec<TrackPoint>,
}

impl VehicleTrack {
    pub fn first_frame(&self) -> Option<u64> {
        self.points.first().map(|p| p.frame_index)
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.points.last().map(|p| p.frame_index)
    }
}

/// Ground-truth future of one actor, starting at the step after the present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FutureTrack {
    pub points: Vec<[f64; 2]>,
    /// False when the actor left the record before the window ended.
    pub complete: bool,
}

/// One sample: `history_len` observed steps (the last one is the present)
/// followed by `future_len` steps of ground truth.
///
/// `history[k]` holds every vehicle observed at step `k + 1`, ego included,
/// sorted by vehicle id. `future` is keyed by actor id and never contains the
/// ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneWindow {
    pub ego_id: u64,
    pub dt: f64,
    pub history_len: usize,
    pub future_len: usize,
    /// Frame index of history step 1 in the source record.
    pub start_frame: u64,
    pub history: Vec<Vec<TrackPoint>>,
    pub future: BTreeMap<u64, FutureTrack>,
}

impl SceneWindow {
    /// Point of `vehicle_id` at 1-based history step `step`.
    pub fn point_at(&self, step: usize, vehicle_id: u64) -> Option<&TrackPoint> {
        if step == 0 || step > self.history.len() {
            return None;
        }
        let row = &self.history[step - 1];
        row.binary_search_by_key(&vehicle_id, |p| p.vehicle_id)
            .ok()
            .map(|i| &row[i])
    }

    pub fn ego_at(&self, step: usize) -> Option<&TrackPoint> {
        self.point_at(step, self.ego_id)
    }

    /// Ego state at the present step.
    pub fn ego_current(&self) -> Option<&TrackPoint> {
        self.ego_at(self.history_len)
    }

    /// Non-ego vehicles observed at the present step.
    pub fn current_actors(&self) -> impl Iterator<Item = &TrackPoint> {
        let ego = self.ego_id;
        self.history
            .last()
            .into_iter()
            .flatten()
            .filter(move |p| p.vehicle_id != ego)
    }
}
