//! Vehicle trajectory prediction on heterogeneous spatial-temporal
//! interaction graphs.
//!
//! The pipeline is split into four modules:
//!
//! - [`traj`]: ingestion of NGSIM-style CSV, a synthetic traffic generator,
//!   downsampling, heading estimation, windowing, ego-frame transform,
//!   min-max scaling and dataset splits.
//! - [`graph`]: construction of the heterogeneous graph with per-step spatial
//!   edges and per-actor temporal edges.
//! - [`model`]: the graph-attention encoder, residual GRU decoder and MLP
//!   output head, with hand-written gradients.
//! - [`train`]: Adam training loop, ADE/FDE/RMSE metrics, a constant-velocity
//!   baseline, positional breakdown and ablation harness.
//!
//! All model math is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pick the concrete precision.

pub mod graph;
pub mod model;
pub mod scalar;
pub mod traj;
pub mod train;

pub use graph::{GraphConfig, HeteroGraph};
pub use scalar::Scalar;
pub use traj::{FeatureScaler, SceneWindow, TrackPoint, VehicleTrack};

/// Double precision parameters; used for training and gradient checks.
pub type ModelParamsF64 = model::ModelParams<f64>;
/// Single precision parameters.
pub type ModelParamsF32 = model::ModelParams<f32>;
/// Double precision trained predictor (parameters plus preprocessing state).
pub type TrainedModelF64 = train::TrainedModel<f64>;
/// Single precision trained predictor.
pub type TrainedModelF32 = train::TrainedModel<f32>;
