use std::io::Write;

use serde::{Deserialize, Serialize};

use super::baseline::cv_baseline_predict;
use super::fit::TrainedModel;
use super::metrics::{ade, fde, rmse_per_second, Trajectory};
use super::sample::{eval_targets, position_bucket, PositionBucket};
use super::{Result, TrainError};
use crate::graph::{build_hetero_graph, GraphConfig};
use crate::model::predict_all;
use crate::traj::SceneWindow;
use crate::Scalar;

/// Anything that forecasts actor positions from a window.
pub trait Predictor {
    fn name(&self) -> &str;

    /// One trajectory of `horizon` positions per requested actor, in order.
    fn predict(&self, window: &SceneWindow, actors: &[u64], horizon: usize) -> Result<Vec<Trajectory>>;

    fn param_count(&self) -> Option<usize> {
        None
    }
}

fn pick(all: Vec<(u64, Trajectory)>, actors: &[u64]) -> Result<Vec<Trajectory>> {
    actors
        .iter()
        .map(|a| {
            all.iter()
                .find(|(id, _)| id == a)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| TrainError::Argument(format!("no prediction for actor {a}")))
        })
        .collect()
}

impl<T: Scalar> Predictor for TrainedModel<T> {
    fn name(&self) -> &str {
        "model"
    }

    fn predict(&self, window: &SceneWindow, actors: &[u64], horizon: usize) -> Result<Vec<Trajectory>> {
        let graph = build_hetero_graph(window, &self.graph, Some(&self.scaler))?;
        let all = predict_all(&self.params, &graph, horizon)?
            .into_iter()
            .map(|(id, t)| (id, t.iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect()))
            .collect();
        pick(all, actors)
    }

    fn param_count(&self) -> Option<usize> {
        Some(self.params.param_count())
    }
}

/// Constant-velocity extrapolation of the last observed displacement.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl Predictor for ConstantVelocity {
    fn name(&self) -> &str {
        "cv"
    }

    fn predict(&self, window: &SceneWindow, actors: &[u64], horizon: usize) -> Result<Vec<Trajectory>> {
        pick(cv_baseline_predict(window, horizon), actors)
    }
}

/// Returns the recorded future; every error metric is zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruth;

impl Predictor for GroundTruth {
    fn name(&self) -> &str {
        "truth"
    }

    fn predict(&self, window: &SceneWindow, actors: &[u64], horizon: usize) -> Result<Vec<Trajectory>> {
        actors
            .iter()
            .map(|a| match window.future.get(a) {
                Some(f) if f.points.len() >= horizon => Ok(f.points[..horizon].to_vec()),
                _ => Err(TrainError::Argument(format!("actor {a} has fewer than {horizon} future points"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMetrics {
    pub actors: usize,
    pub ade: f64,
    pub fde: f64,
    pub rmse_per_second: Vec<f64>,
}

/// Metrics per longitudinal position bucket; empty buckets are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReports {
    pub front: Option<BucketMetrics>,
    pub mid: Option<BucketMetrics>,
    pub rear: Option<BucketMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictor: String,
    pub horizon: usize,
    pub ade: f64,
    pub fde: f64,
    /// RMSE at 1 s, 2 s, ... up to the horizon.
    pub rmse_per_second: Vec<f64>,
    pub buckets: BucketReports,
    pub param_count: Option<usize>,
    /// Windows that contributed at least one actor.
    pub windows: usize,
    pub actors: usize,
}

fn metrics(preds: &[Trajectory], truths: &[Trajectory], dt: f64) -> Result<BucketMetrics> {
    Ok(BucketMetrics {
        actors: preds.len(),
        ade: ade(preds, truths)?,
        fde: fde(preds, truths)?,
        rmse_per_second: rmse_per_second(preds, truths, dt)?,
    })
}

/// Scores `predictor` on every actor returned by [`eval_targets`].
pub fn evaluate(
    predictor: &dyn Predictor,
    windows: &[SceneWindow],
    graph: &GraphConfig,
    horizon: usize,
) -> Result<EvalReport> {
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let mut buckets = Vec::new();
    let mut used = 0;
    let mut dt = None;
    for w in windows {
        let targets = eval_targets(w, graph, horizon)?;
        if targets.is_empty() {
            continue;
        }
        match dt {
            None => dt = Some(w.dt),
            Some(d) if (d - w.dt).abs() > 1e-9 => {
                return Err(TrainError::Argument(format!("mixed sampling periods {d} and {}", w.dt)))
            }
            _ => {}
        }
        used += 1;
        let ids: Vec<u64> = targets.iter().map(|t| t.actor_id).collect();
        let p = predictor.predict(w, &ids, horizon)?;
        preds.extend(p);
        for t in targets {
            buckets.push(position_bucket(t.longitudinal));
            truths.push(t.truth);
        }
    }
    let dt = dt.ok_or_else(|| TrainError::Argument("no window has a scorable actor".into()))?;
    let overall = metrics(&preds, &truths, dt)?;
    let bucket = |b: PositionBucket| -> Result<Option<BucketMetrics>> {
        let idx: Vec<usize> = (0..buckets.len()).filter(|&i| buckets[i] == b).collect();
        if idx.is_empty() {
            return Ok(None);
        }
        let p: Vec<Trajectory> = idx.iter().map(|&i| preds[i].clone()).collect();
        let t: Vec<Trajectory> = idx.iter().map(|&i| truths[i].clone()).collect();
        metrics(&p, &t, dt).map(Some)
    };
    Ok(EvalReport {
        predictor: predictor.name().to_string(),
        horizon,
        ade: overall.ade,
        fde: overall.fde,
        rmse_per_second: overall.rmse_per_second,
        buckets: BucketReports {
            front: bucket(PositionBucket::Front)?,
            mid: bucket(PositionBucket::Mid)?,
            rear: bucket(PositionBucket::Rear)?,
        },
        param_count: predictor.param_count(),
        windows: used,
        actors: preds.len(),
    })
}

/// Per-bucket metrics only.
pub fn position_bucket_eval(
    predictor: &dyn Predictor,
    windows: &[SceneWindow],
    graph: &GraphConfig,
    horizon: usize,
) -> Result<BucketReports> {
    Ok(evaluate(predictor, windows, graph, horizon)?.buckets)
}

impl EvalReport {
    /// One row per scope (`all`, then each non-empty bucket):
    /// `scope,actors,ade,fde,rmse_1s,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["scope".to_string(), "actors".into(), "ade".into(), "fde".into()];
        header.extend((1..=self.rmse_per_second.len()).map(|s| format!("rmse_{s}s")));
        w.write_record(&header)?;
        let mut row = |scope: &str, m: &BucketMetrics| -> Result<()> {
            let mut r = vec![scope.to_string(), m.actors.to_string(), m.ade.to_string(), m.fde.to_string()];
            r.extend(m.rmse_per_second.iter().map(|v| v.to_string()));
            w.write_record(&r)?;
            Ok(())
        };
        let all = BucketMetrics {
            actors: self.actors,
            ade: self.ade,
            fde: self.fde,
            rmse_per_second: self.rmse_per_second.clone(),
        };
        row("all", &all)?;
        for (name, b) in [("front", &self.buckets.front), ("mid", &self.buckets.mid), ("rear", &self.buckets.rear)] {
            if let Some(m) = b {
                row(name, m)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn bucket_total(&self) -> usize {
        [&self.buckets.front, &self.buckets.mid, &self.buckets.rear]
            .iter()
            .map(|b| b.as_ref().map_or(0, |m| m.actors))
            .sum()
    }
}
