//! Run configuration: a TOML file with one table per concern, every key
//! optional, unknown keys rejected. Command-line flags override file values.
//!
//! ```toml
//! precision = "f64"
//!
//! [data]
//! history = 16
//! future = 25
//! downsample = 2
//!
//! [train]
//! epochs = 50
//! learning_rate = 0.001
//!
//! [eval]
//! split = "test"
//!
//! [ablate]
//! d_min_values = [0.0, 25.0, 50.0]
//! ```

use std::path::Path;

use aigem::traj::{LengthUnit, DEFAULT_FRACTIONS};
use aigem::train::TrainConfig;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result, ResultExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    #[default]
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Model,
    Cv,
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AblationKind {
    Dmin,
    Concat,
    #[default]
    Both,
}

/// How raw tracks become a windowed dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// History steps including the present.
    pub history: usize,
    pub future: usize,
    /// Frames between window starts; absent means non-overlapping windows.
    pub stride: Option<usize>,
    /// Keep every n-th frame of the recording (NGSIM: 10 Hz to 5 Hz).
    pub downsample: i64,
    pub unit: LengthUnit,
    /// Seed of the train/val/test shuffle.
    pub seed: u64,
    pub fractions: [f64; 3],
    /// Sensing radius used when cutting windows and fitting the scaler.
    pub radius: f64,
    /// Restrict ego vehicles to these ids; all vehicles when absent.
    pub egos: Option<Vec<u64>>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            history: 16,
            future: 25,
            stride: None,
            downsample: 2,
            unit: LengthUnit::Feet,
            seed: 0,
            fractions: DEFAULT_FRACTIONS,
            radius: 50.0,
            egos: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split: Split,
    pub predictor: PredictorKind,
    /// Defaults to the model's training horizon, or `train.horizon`.
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub kind: AblationKind,
    pub d_min_values: Vec<f64>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self { kind: AblationKind::Both, d_min_values: vec![0.0, 25.0, 50.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub precision: Precision,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ablate: AblateConfig,
}

impl RunConfig {
    /// Defaults, or the contents of `path` when given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).usage_ctx(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).usage_ctx(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(CliError::usage)
    }
}
