//! Heterogeneous spatial-temporal interaction graph.
//!
//! Every history step contributes a spatial graph: the ego plus each actor
//! within the sensing radius, ego-actor edges for every sensed actor, and
//! actor-actor edges when two sensed actors are within `d_min` of each other.
//! Spatial edges are stored as directed pairs and carry the (scaled)
//! distance. Consecutive appearances of the same vehicle are then linked by
//! a unidirectional temporal edge carrying the sampling time.
//!
//! Node ids are dense and ordered by `(step, discovery order)`, where the ego
//! is discovered first and actors follow in vehicle-id order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::traj::{FeatureScaler, SceneWindow};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("ego vehicle {ego_id} missing at step {step}")]
    EgoMissing { ego_id: u64, step: usize },
    #[error("step {step} outside 1..={history_len}")]
    StepOutOfRange { step: usize, history_len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Sensing radius around the ego in meters.
    pub radius: f64,
    /// Actor-actor edge threshold in meters.
    pub d_min: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { radius: 50.0, d_min: 25.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub actor_id: u64,
    /// 1-based history step.
    pub step: usize,
    pub is_ego: bool,
    /// Unscaled `(x, y, theta, v)` in meters, radians and m/s.
    pub raw: [f64; 4],
    /// Model input features (scaled when a scaler was supplied).
    pub features: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialEdge {
    pub src: usize,
    pub dst: usize,
    /// Euclidean distance in meters.
    pub distance: f64,
    /// Edge attribute fed to the model.
    pub attr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub src: usize,
    pub dst: usize,
    /// Sampling time in seconds, never scaled.
    pub dt: f64,
}

/// Nodes of one history step in discovery order, with spatial edges given
/// as local indices into `nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGraph {
    pub step: usize,
    /// `(actor_id, is_ego, raw features)`
    pub nodes: Vec<(u64, bool, [f64; 4])>,
    /// `(local src, local dst, distance in meters)`
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GraphRepr", into = "GraphRepr")]
pub struct HeteroGraph {
    pub ego_id: u64,
    pub history_len: usize,
    pub dt: f64,
    pub nodes: Vec<GraphNode>,
    pub spatial_edges: Vec<SpatialEdge>,
    pub temporal_edges: Vec<TemporalEdge>,
    lookup: HashMap<(u64, usize), usize>,
}

/// On-disk layout: a node table and the two edge tables.
#[derive(Serialize, Deserialize)]
struct GraphRepr {
    ego_id: u64,
    history_len: usize,
    dt: f64,
    nodes: Vec<GraphNode>,
    spatial_edges: Vec<SpatialEdge>,
    temporal_edges: Vec<TemporalEdge>,
}

impl From<GraphRepr> for HeteroGraph {
    fn from(r: GraphRepr) -> Self {
        HeteroGraph::from_parts(r.ego_id, r.history_len, r.dt, r.nodes, r.spatial_edges, r.temporal_edges)
    }
}

impl From<HeteroGraph> for GraphRepr {
    fn from(g: HeteroGraph) -> Self {
        GraphRepr {
            ego_id: g.ego_id,
            history_len: g.history_len,
            dt: g.dt,
            nodes: g.nodes,
            spatial_edges: g.spatial_edges,
            temporal_edges: g.temporal_edges,
        }
    }
}

impl HeteroGraph {
    pub fn from_parts(
        ego_id: u64,
        history_len: usize,
        dt: f64,
        nodes: Vec<GraphNode>,
        spatial_edges: Vec<SpatialEdge>,
        temporal_edges: Vec<TemporalEdge>,
    ) -> Self {
        let lookup = nodes.iter().map(|n| ((n.actor_id, n.step), n.id)).collect();
        Self { ego_id, history_len, dt, nodes, spatial_edges, temporal_edges, lookup }
    }

    pub fn node_id(&self, actor_id: u64, step: usize) -> Option<usize> {
        self.lookup.get(&(actor_id, step)).copied()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Re-labels nodes with `perm[old] = new` and re-indexes every edge.
    pub fn permuted(&self, perm: &[usize]) -> HeteroGraph {
        let mut nodes = vec![None; self.nodes.len()];
        for n in &self.nodes {
            let mut m = n.clone();
            let id = perm[n.id];
            m.id = id;
            nodes[id] = Some(m);
        }
        let nodes = nodes.into_iter().map(|n| n.expect("perm is a bijection")).collect();
        let spatial = self
            .spatial_edges
            .iter()
            .map(|e| SpatialEdge { src: perm[e.src], dst: perm[e.dst], ..*e })
            .collect();
        let temporal = self
            .temporal_edges
            .iter()
            .map(|e| TemporalEdge { src: perm[e.src], dst: perm[e.dst], ..*e })
            .collect();
        HeteroGraph::from_parts(self.ego_id, self.history_len, self.dt, nodes, spatial, temporal)
    }
}

fn raw_features(p: &crate::traj::TrackPoint) -> [f64; 4] {
    [p.x, p.y, p.theta, p.v]
}

/// Spatial graph of history step `step` (1-based). Thresholds apply to
/// unscaled meter distances and are inclusive.
pub fn build_spatial_graph(window: &SceneWindow, step: usize, cfg: &GraphConfig) -> Result<StepGraph, GraphError> {
    if step == 0 || step > window.history.len() {
        return Err(GraphError::StepOutOfRange { step, history_len: window.history.len() });
    }
    let ego = window.ego_at(step).ok_or(GraphError::EgoMissing { ego_id: window.ego_id, step })?;
    let mut nodes = vec![(ego.vehicle_id, true, raw_features(ego))];
    let mut edges = Vec::new();
    for p in &window.history[step - 1] {
        if p.vehicle_id == window.ego_id {
            continue;
        }
        let d = (p.x - ego.x).hypot(p.y - ego.y);
        if d <= cfg.radius {
            let i = nodes.len();
            nodes.push((p.vehicle_id, false, raw_features(p)));
            edges.push((0, i, d));
            edges.push((i, 0, d));
        }
    }
    for i in 1..nodes.len() {
        for j in i + 1..nodes.len() {
            let (a, b) = (&nodes[i].2, &nodes[j].2);
            let d = (a[0] - b[0]).hypot(a[1] - b[1]);
            if d <= cfg.d_min {
                edges.push((i, j, d));
                edges.push((j, i, d));
            }
        }
    }
    Ok(StepGraph { step, nodes, edges })
}

/// Global id offsets of each step graph under dense `(step, order)` ids.
fn offsets(steps: &[StepGraph]) -> Vec<usize> {
    steps
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.nodes.len();
            Some(o)
        })
        .collect()
}

/// Links each vehicle present at consecutive steps `k` and `k + 1`.
///
/// `steps` must be ordered by step; ids follow the dense `(step, order)`
/// numbering used by [`build_hetero_graph`].
pub fn add_temporal_edges(steps: &[StepGraph], dt: f64) -> Vec<TemporalEdge> {
    let off = offsets(steps);
    let mut out = Vec::new();
    for k in 1..steps.len() {
        let (prev, next) = (&steps[k - 1], &steps[k]);
        if next.step != prev.step + 1 {
            continue;
        }
        let index: HashMap<u64, usize> = next.nodes.iter().enumerate().map(|(i, n)| (n.0, i)).collect();
        for (i, n) in prev.nodes.iter().enumerate() {
            if let Some(&j) = index.get(&n.0) {
                out.push(TemporalEdge { src: off[k - 1] + i, dst: off[k] + j, dt });
            }
        }
    }
    out
}

/// Assembles the heterogeneous graph of a window's history.
///
/// With a scaler, node features and spatial edge attributes are min-max
/// scaled; without one they are left in physical units.
pub fn build_hetero_graph(
    window: &SceneWindow,
    cfg: &GraphConfig,
    scaler: Option<&FeatureScaler>,
) -> Result<HeteroGraph, GraphError> {
    let steps = (1..=window.history_len)
        .map(|k| build_spatial_graph(window, k, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let off = offsets(&steps);
    let mut nodes = Vec::new();
    let mut spatial = Vec::new();
    for (s, o) in steps.iter().zip(&off) {
        for (i, &(actor_id, is_ego, raw)) in s.nodes.iter().enumerate() {
            let features = scaler.map_or(raw, |sc| sc.apply_node(raw));
            nodes.push(GraphNode { id: o + i, actor_id, step: s.step, is_ego, raw, features });
        }
        for &(a, b, d) in &s.edges {
            let attr = scaler.map_or(d, |sc| sc.distance.apply(d));
            spatial.push(SpatialEdge { src: o + a, dst: o + b, distance: d, attr });
        }
    }
    let temporal = add_temporal_edges(&steps, window.dt);
    Ok(HeteroGraph::from_parts(window.ego_id, window.history_len, window.dt, nodes, spatial, temporal))
}

/// Non-ego nodes at the present step as `(actor_id, node_id)`, by actor id.
pub fn current_frame_nodes(graph: &HeteroGraph) -> Vec<(u64, usize)> {
    let mut out: Vec<(u64, usize)> = graph
        .nodes
        .iter()
        .filter(|n| n.step == graph.history_len && !n.is_ego)
        .map(|n| (n.actor_id, n.id))
        .collect();
    out.sort_unstable();
    out
}
