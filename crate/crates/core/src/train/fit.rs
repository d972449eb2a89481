use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::Adam;
use super::sample::prepare_example;
use super::{Result, TrainError};
use crate::graph::GraphConfig;
use crate::model::{
    load_checkpoint, loss_and_gradients, predict_example, save_checkpoint, Example, ModelConfig, ModelParams,
};
use crate::traj::{FeatureScaler, SceneWindow};
use crate::Scalar;

/// Prediction horizons (in steps) a model may be trained for: 1 to 5 s at a
/// 0.2 s sampling period.
pub const ALLOWED_HORIZONS: [usize; 5] = [5, 10, 15, 20, 25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate factor; 1 keeps it constant.
    pub lr_decay: f64,
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Future steps predicted; one model is trained per horizon.
    pub horizon: usize,
    pub radius: f64,
    pub d_min: f64,
    pub concat: bool,
    pub layers: usize,
    pub hidden: usize,
    pub mlp_hidden: Vec<usize>,
    /// Stop once the eval-mode training ADE (meters) drops below this value.
    pub stop_at_train_ade: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let g = GraphConfig::default();
        Self {
            learning_rate: 1e-3,
            lr_decay: 1.0,
            epochs: 100,
            batch_size: 4,
            dropout: m.dropout,
            seed: 0,
            horizon: 25,
            radius: g.radius,
            d_min: g.d_min,
            concat: m.concat,
            layers: m.layers,
            hidden: m.hidden,
            mlp_hidden: m.mlp_hidden,
            stop_at_train_ade: None,
        }
    }
}

impl TrainConfig {
    pub fn graph(&self) -> GraphConfig {
        GraphConfig { radius: self.radius, d_min: self.d_min }
    }

    pub fn model_config(&self, scaler: &FeatureScaler) -> ModelConfig {
        ModelConfig {
            layers: self.layers,
            hidden: self.hidden,
            mlp_hidden: self.mlp_hidden.clone(),
            concat: self.concat,
            dropout: self.dropout,
            ..Default::default()
        }
        .with_scaler(scaler)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Argument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must be in (0, 1], got {}", self.lr_decay));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if !ALLOWED_HORIZONS.contains(&self.horizon) {
            return bad(format!("horizon must be one of {ALLOWED_HORIZONS:?}, got {}", self.horizon));
        }
        if !(self.radius > 0.0) || !(self.d_min >= 0.0) {
            return bad("radius must be positive and d_min non-negative".into());
        }
        Ok(())
    }
}

/// Metrics of one epoch. Losses and RMSE are evaluated without dropout
/// after the epoch's updates; `batch_loss` is the mean minibatch loss seen
/// during the updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub batch_loss: f64,
    pub train_loss: f64,
    pub train_rmse: f64,
    pub train_ade: f64,
    pub val_loss: f64,
    pub val_rmse: f64,
}

/// Parameters plus the preprocessing they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub params: ModelParams<T>,
    pub scaler: FeatureScaler,
    pub graph: GraphConfig,
    pub horizon: usize,
}

impl<T: Scalar> TrainedModel<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut meta = BTreeMap::new();
        meta.insert("scaler".into(), serde_json::to_value(&self.scaler)?);
        meta.insert("graph".into(), serde_json::to_value(self.graph)?);
        meta.insert("horizon".into(), serde_json::to_value(self.horizon)?);
        save_checkpoint(path, &self.params, meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, ck) = load_checkpoint::<T>(path)?;
        let field = |k: &str| {
            ck.metadata
                .get(k)
                .cloned()
                .ok_or_else(|| TrainError::Argument(format!("checkpoint {} lacks `{k}` metadata", path.display())))
        };
        Ok(Self {
            params,
            scaler: serde_json::from_value(field("scaler")?)?,
            graph: serde_json::from_value(field("graph")?)?,
            horizon: serde_json::from_value(field("horizon")?)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: TrainedModel<T>,
    pub curves: Vec<EpochRecord>,
    pub best_epoch: usize,
}

pub(crate) fn prepare_all<T: Scalar>(
    windows: &[SceneWindow],
    cfg: &GraphConfig,
    scaler: &FeatureScaler,
    horizon: usize,
) -> Result<Vec<Example<T>>> {
    let mut out = Vec::with_capacity(windows.len());
    for w in windows {
        if let Some((ex, _)) = prepare_example(w, cfg, Some(scaler), horizon)? {
            out.push(ex);
        }
    }
    Ok(out)
}

struct SetMetrics {
    loss: f64,
    rmse: f64,
    ade: f64,
}

/// Examples merged per forward pass during evaluation.
const EVAL_CHUNK: usize = 16;

fn set_metrics<T: Scalar>(params: &ModelParams<T>, set: &[Example<T>]) -> Result<SetMetrics> {
    let (mut loss, mut sq, mut dist, mut count) = (0.0, 0.0, 0.0, 0usize);
    for chunk in set.chunks(EVAL_CHUNK) {
        let parts: Vec<&Example<T>> = chunk.iter().collect();
        let merged = Example::concat(&parts)?;
        let preds = predict_example(params, &merged)?;
        let mut start = 0;
        for ex in chunk {
            let n = ex.rows.len();
            let mut ex_sq = 0.0;
            for (p, t) in preds.iter().zip(&merged.targets) {
                for r in start..start + n {
                    let d2 = (p[(r, 0)] - t[(r, 0)]).as_f64().powi(2) + (p[(r, 1)] - t[(r, 1)]).as_f64().powi(2);
                    ex_sq += d2;
                    dist += d2.sqrt();
                    count += 1;
                }
            }
            sq += ex_sq;
            loss += ex_sq / (2 * n * ex.horizon()) as f64;
            start += n;
        }
    }
    let n = count.max(1) as f64;
    Ok(SetMetrics { loss: loss / set.len().max(1) as f64, rmse: (sq / n).sqrt(), ade: dist / n })
}

/// Trains a model with Adam and keeps the parameters with the lowest
/// validation loss.
///
/// Windows without a scorable actor are skipped. Shuffling and dropout
/// draw from separate ChaCha streams derived from `config.seed`, so the
/// whole run is a deterministic function of its inputs.
pub fn train<T: Scalar>(
    config: &TrainConfig,
    train_windows: &[SceneWindow],
    val_windows: &[SceneWindow],
    scaler: &FeatureScaler,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let graph = config.graph();
    let train_set = prepare_all::<T>(train_windows, &graph, scaler, config.horizon)?;
    let val_set = prepare_all::<T>(val_windows, &graph, scaler, config.horizon)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::Argument(format!(
            "need scorable windows in both splits (train {}, val {})",
            train_set.len(),
            val_set.len()
        )));
    }

    let mut params = ModelParams::<T>::init(config.model_config(scaler), config.seed)?;
    let mut adam = Adam::new(config.learning_rate, params.param_count());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    for epoch in 1..=config.epochs {
        adam.lr = config.learning_rate * config.lr_decay.powi(epoch as i32 - 1);
        order.shuffle(&mut shuffle_rng);
        let mut batch_loss = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Example<T>> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grad) = loss_and_gradients(&params, &batch, Some(&mut dropout_rng))?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch, batch: b, loss });
            }
            adam.step(&mut params, &grad);
            batch_loss += loss;
            batches += 1;
        }
        let tr = set_metrics(&params, &train_set)?;
        let va = set_metrics(&params, &val_set)?;
        if !(tr.loss.is_finite() && va.loss.is_finite()) {
            return Err(TrainError::Divergence { epoch, batch: batches, loss: if tr.loss.is_finite() { va.loss } else { tr.loss } });
        }
        curves.push(EpochRecord {
            epoch,
            batch_loss: batch_loss / batches as f64,
            train_loss: tr.loss,
            train_rmse: tr.rmse,
            train_ade: tr.ade,
            val_loss: va.loss,
            val_rmse: va.rmse,
        });
        if best.as_ref().is_none_or(|b| va.loss < b.0) {
            best = Some((va.loss, epoch, params.clone()));
        }
        if config.stop_at_train_ade.is_some_and(|t| tr.ade < t) {
            break;
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model: TrainedModel { params: best_params, scaler: scaler.clone(), graph, horizon: config.horizon },
        curves,
        best_epoch,
    })
}
