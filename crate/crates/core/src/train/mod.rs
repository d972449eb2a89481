//! Training, evaluation metrics, a constant-velocity baseline, positional
//! breakdown and the ablation harness.

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::ModelError;
use crate::traj::TrajError;

mod ablate;
mod baseline;
mod eval;
mod fit;
mod metrics;
mod optim;
mod sample;

pub use ablate::{ablate_concat, ablate_dmin, actor_actor_edge_count, AblationData, AblationRow, AblationTable};
pub use baseline::{cv_baseline_predict, cv_extrapolate};
pub use eval::{
    evaluate, position_bucket_eval, BucketMetrics, BucketReports, ConstantVelocity, EvalReport, GroundTruth,
    Predictor,
};
pub use fit::{train, EpochRecord, TrainConfig, TrainOutcome, TrainedModel, ALLOWED_HORIZONS};
pub use metrics::{ade, fde, rmse_at, rmse_per_second, steps_per_second, Trajectory};
pub use optim::Adam;
pub use sample::{eval_targets, position_bucket, prepare_example, EvalTarget, PositionBucket, BUCKET_HALF_WIDTH};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] TrajError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
