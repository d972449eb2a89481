use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::Trajectory;
use super::{Result, TrainError};
use crate::graph::{build_hetero_graph, GraphConfig};
use crate::model::{Example, GraphInput};
use crate::traj::{FeatureScaler, SceneWindow};
use crate::Scalar;

/// Longitudinal half width of the middle bucket, inclusive.
pub const BUCKET_HALF_WIDTH: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionBucket {
    Front,
    Mid,
    Rear,
}

/// Front beyond +15 m, rear beyond -15 m, mid in between (inclusive).
pub fn position_bucket(longitudinal: f64) -> PositionBucket {
    if longitudinal > BUCKET_HALF_WIDTH {
        PositionBucket::Front
    } else if longitudinal < -BUCKET_HALF_WIDTH {
        PositionBucket::Rear
    } else {
        PositionBucket::Mid
    }
}

/// An actor scored in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTarget {
    pub actor_id: u64,
    pub truth: Trajectory,
    /// Offset from the ego along the ego heading at the present step.
    pub longitudinal: f64,
}

/// Actors that are graph nodes at the present step (within the sensing
/// radius of the ego) and have at least `horizon` future positions.
pub fn eval_targets(window: &SceneWindow, cfg: &GraphConfig, horizon: usize) -> Result<Vec<EvalTarget>> {
    let ego = window.ego_current().ok_or_else(|| {
        TrainError::Data(crate::traj::TrajError::EgoMissing { ego_id: window.ego_id, step: window.history_len })
    })?;
    let (c, s) = (ego.theta.cos(), ego.theta.sin());
    let mut out = Vec::new();
    for p in window.current_actors() {
        let (dx, dy) = (p.x - ego.x, p.y - ego.y);
        if dx.hypot(dy) > cfg.radius {
            continue;
        }
        let Some(f) = window.future.get(&p.vehicle_id) else { continue };
        if f.points.len() < horizon {
            continue;
        }
        out.push(EvalTarget { actor_id: p.vehicle_id, truth: f.points[..horizon].to_vec(), longitudinal: dx * c + dy * s });
    }
    Ok(out)
}

/// Builds the graph of a window and the supervision for its scorable actors.
/// Returns `None` when no actor qualifies.
pub fn prepare_example<T: Scalar>(
    window: &SceneWindow,
    cfg: &GraphConfig,
    scaler: Option<&FeatureScaler>,
    horizon: usize,
) -> Result<Option<(Example<T>, Vec<u64>)>> {
    if horizon == 0 {
        return Err(TrainError::Argument("horizon must be >= 1".into()));
    }
    let targets = eval_targets(window, cfg, horizon)?;
    if targets.is_empty() {
        return Ok(None);
    }
    let graph = build_hetero_graph(window, cfg, scaler)?;
    let rows: Vec<usize> = targets
        .iter()
        .map(|t| {
            graph
                .node_id(t.actor_id, window.history_len)
                .ok_or(crate::model::ModelError::MissingActor { actor_id: t.actor_id, step: window.history_len })
        })
        .collect::<std::result::Result<_, _>>()?;
    let n = rows.len();
    let current = Array2::from_shape_fn((n, 2), |(i, j)| T::of(graph.nodes[rows[i]].raw[j]));
    let targets_m = (0..horizon)
        .map(|k| Array2::from_shape_fn((n, 2), |(i, j)| T::of(targets[i].truth[k][j])))
        .collect();
    let ids = targets.iter().map(|t| t.actor_id).collect();
    Ok(Some((Example { input: GraphInput::from_graph(&graph), rows, current, targets: targets_m }, ids)))
}
