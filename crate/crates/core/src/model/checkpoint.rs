use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ModelParams, Result};
use crate::Scalar;

pub const CHECKPOINT_FORMAT: &str = "aigem-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Serialized parameters. Values are stored as `f64` regardless of the
/// in-memory precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn from_params<T: Scalar>(params: &ModelParams<T>, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .map(|(name, shape, data)| NamedTensor { name, shape, data: data.iter().map(|x| x.as_f64()).collect() })
            .collect();
        Self { format: CHECKPOINT_FORMAT.into(), config: params.config.clone(), tensors, metadata }
    }

    /// Rebuilds parameters; every tensor must match the configured
    /// architecture by name, shape and order.
    pub fn to_params<T: Scalar>(&self) -> Result<ModelParams<T>> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint(format!("unsupported format {:?}", self.format)));
        }
        let mut params = ModelParams::<T>::init(self.config.clone(), 0)?;
        let expected: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != self.tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if name != &t.name || shape != &t.shape {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, name, shape
                )));
            }
            if t.data.len() != shape.iter().product::<usize>() {
                return Err(ModelError::Checkpoint(format!("tensor {} has {} values", t.name, t.data.len())));
            }
        }
        let flat: Vec<T> = self.tensors.iter().flat_map(|t| t.data.iter().map(|&x| T::of(x))).collect();
        params.assign_flat(&flat)?;
        Ok(params)
    }
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    params: &ModelParams<T>,
    metadata: BTreeMap<String, serde_json::Value>,
) -> Result<()> {
    let ck = Checkpoint::from_params(params, metadata);
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(file, &ck)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(ModelParams<T>, Checkpoint)> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let ck: Checkpoint = serde_json::from_reader(file)?;
    Ok((ck.to_params()?, ck))
}
