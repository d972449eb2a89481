use std::borrow::Borrow;

use ndarray::{Array1, Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;

use super::gru::{decode_backward, decode_batch};
use super::head::{rollout, rollout_backward};
use super::{Dropout, GraphInput, ModelError, ModelParams, Result};
use crate::graph::{current_frame_nodes, HeteroGraph};
use crate::Scalar;

/// One training sample: a graph plus the actors to predict and their futures.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub input: GraphInput<T>,
    /// Node id of each predicted actor at the present step.
    pub rows: Vec<usize>,
    /// Present positions in meters, `rows.len() x 2`.
    pub current: Array2<T>,
    /// Ground-truth positions per future step, each `rows.len() x 2`.
    pub targets: Vec<Array2<T>>,
}

impl<T: Scalar> Example<T> {
    pub fn horizon(&self) -> usize {
        self.targets.len()
    }

    /// Disjoint union of several examples: graphs are stacked with shifted
    /// node ids, so one pass over the union equals one pass per part.
    pub fn concat(parts: &[&Example<T>]) -> Result<Example<T>> {
        let first = parts.first().ok_or_else(|| ModelError::Argument("nothing to concatenate".into()))?;
        let horizon = first.horizon();
        if parts.iter().any(|p| p.horizon() != horizon) {
            return Err(ModelError::Shape("examples differ in horizon".into()));
        }
        if parts.len() == 1 {
            return Ok((*first).clone());
        }
        let total: usize = parts.iter().map(|p| p.input.num_nodes()).sum();
        let mut offset = 0;
        let mut spatial = Vec::new();
        let mut temporal = Vec::new();
        let mut rows = Vec::new();
        for p in parts {
            let shift = |set: &super::EdgeSet<T>, out: &mut Vec<(usize, usize, T)>| {
                out.extend((0..set.len()).map(|e| (set.src[e] + offset, set.dst[e] + offset, set.attr[e])));
            };
            shift(&p.input.spatial, &mut spatial);
            shift(&p.input.temporal, &mut temporal);
            rows.extend(p.rows.iter().map(|r| r + offset));
            offset += p.input.num_nodes();
        }
        let stack = |f: &dyn Fn(&Example<T>) -> ArrayView2<'_, T>| -> Result<Array2<T>> {
            let views: Vec<ArrayView2<'_, T>> = parts.iter().map(|p| f(p)).collect();
            ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| ModelError::Shape(e.to_string()))
        };
        let features = stack(&|p| p.input.features.view())?;
        let current = stack(&|p| p.current.view())?;
        let targets = (0..horizon).map(|k| stack(&|p| p.targets[k].view())).collect::<Result<_>>()?;
        Ok(Example {
            input: GraphInput {
                features,
                spatial: super::EdgeSet::from_typed(total, spatial),
                temporal: super::EdgeSet::from_typed(total, temporal),
            },
            rows,
            current,
            targets,
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.rows.len();
        if n == 0 || self.targets.is_empty() {
            return Err(ModelError::Argument("example has no actors or no future steps".into()));
        }
        if self.current.dim() != (n, 2) || self.targets.iter().any(|t| t.dim() != (n, 2)) {
            return Err(ModelError::Shape(format!("positions must be {n} x 2")));
        }
        if let Some(&r) = self.rows.iter().find(|&&r| r >= self.input.num_nodes()) {
            return Err(ModelError::Shape(format!("row {r} outside graph of {} nodes", self.input.num_nodes())));
        }
        Ok(())
    }
}

/// Embedding row of `actor_id` at the present step.
pub fn extract_current<T: Scalar>(embeddings: &Array2<T>, graph: &HeteroGraph, actor_id: u64) -> Result<Array1<T>> {
    let id = graph
        .node_id(actor_id, graph.history_len)
        .ok_or(ModelError::MissingActor { actor_id, step: graph.history_len })?;
    if id >= embeddings.nrows() {
        return Err(ModelError::Shape(format!("{} embeddings for node {id}", embeddings.nrows())));
    }
    Ok(embeddings.row(id).to_owned())
}

/// Decodes present-step embeddings (`rows x hidden`) into `horizon` position
/// matrices (`rows x 2`, meters), starting from `current`.
pub fn predict_from_embeddings<T: Scalar>(
    z: ArrayView2<'_, T>,
    current: ArrayView2<'_, T>,
    horizon: usize,
    params: &ModelParams<T>,
) -> Result<Vec<Array2<T>>> {
    if current.dim() != (z.nrows(), 2) {
        return Err(ModelError::Shape(format!("current positions must be {} x 2", z.nrows())));
    }
    let dec = decode_batch(&z.to_owned(), horizon, &params.gru, None)?;
    let roll = rollout(dec.outputs(), current.to_owned(), &params.head, &params.config);
    Ok(roll.positions.into_iter().skip(1).collect())
}

fn check_graph<T: Scalar>(params: &ModelParams<T>, input: &GraphInput<T>) -> Result<()> {
    if input.features.ncols() != params.config.input_dim {
        return Err(ModelError::Shape(format!(
            "graph features have width {}, model expects {}",
            input.features.ncols(),
            params.config.input_dim
        )));
    }
    Ok(())
}

/// Predicts every non-ego actor present at the last history step, with a
/// single encoder pass. Returns `(actor_id, positions)` sorted by actor id.
pub fn predict_all<T: Scalar>(
    params: &ModelParams<T>,
    graph: &HeteroGraph,
    horizon: usize,
) -> Result<Vec<(u64, Vec<[T; 2]>)>> {
    let actors = current_frame_nodes(graph);
    if actors.is_empty() {
        return Ok(Vec::new());
    }
    let input = GraphInput::<T>::from_graph(graph);
    check_graph(params, &input)?;
    let (emb, _) = params.encoder.forward_cached(&input, T::of(params.config.leaky_slope), None)?;
    let z = Array2::from_shape_fn((actors.len(), emb.ncols()), |(i, j)| emb[(actors[i].1, j)]);
    let current = Array2::from_shape_fn((actors.len(), 2), |(i, j)| T::of(graph.nodes[actors[i].1].raw[j]));
    let steps = predict_from_embeddings(z.view(), current.view(), horizon, params)?;
    Ok(actors
        .iter()
        .enumerate()
        .map(|(i, &(id, _))| (id, steps.iter().map(|s| [s[(i, 0)], s[(i, 1)]]).collect()))
        .collect())
}

/// Predicts one actor's next `horizon` positions in meters.
pub fn predict_actor<T: Scalar>(
    params: &ModelParams<T>,
    graph: &HeteroGraph,
    actor_id: u64,
    horizon: usize,
) -> Result<Vec<[T; 2]>> {
    let id = graph
        .node_id(actor_id, graph.history_len)
        .ok_or(ModelError::MissingActor { actor_id, step: graph.history_len })?;
    let input = GraphInput::<T>::from_graph(graph);
    check_graph(params, &input)?;
    let (emb, _) = params.encoder.forward_cached(&input, T::of(params.config.leaky_slope), None)?;
    let z = emb.row(id).to_owned().insert_axis(ndarray::Axis(0));
    let raw = graph.nodes[id].raw;
    let current = Array2::from_shape_vec((1, 2), vec![T::of(raw[0]), T::of(raw[1])]).expect("1x2");
    let steps = predict_from_embeddings(z.view(), current.view(), horizon, params)?;
    Ok(steps.iter().map(|s| [s[(0, 0)], s[(0, 1)]]).collect())
}

/// Forward pass over a prepared example without dropout; returns one
/// `rows x 2` position matrix per future step.
pub fn predict_example<T: Scalar>(params: &ModelParams<T>, ex: &Example<T>) -> Result<Vec<Array2<T>>> {
    ex.validate()?;
    check_graph(params, &ex.input)?;
    let (emb, _) = params.encoder.forward_cached(&ex.input, T::of(params.config.leaky_slope), None)?;
    let z = emb.select(ndarray::Axis(0), &ex.rows);
    predict_from_embeddings(z.view(), ex.current.view(), ex.horizon(), params)
}

/// Mean squared error over the batch and its parameter gradients.
///
/// Each example contributes the mean over its actors, steps and both
/// coordinates; the batch loss is the mean over examples. The batch is
/// processed as one disjoint-union graph. With an RNG, dropout is active at
/// the configured rate.
pub fn loss_and_gradients<T: Scalar, B: Borrow<Example<T>>>(
    params: &ModelParams<T>,
    batch: &[B],
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(T, ModelParams<T>)> {
    if batch.is_empty() {
        return Err(ModelError::Argument("empty batch".into()));
    }
    let parts: Vec<&Example<T>> = batch.iter().map(|b| b.borrow()).collect();
    for ex in &parts {
        ex.validate()?;
    }
    // per-row loss weight 1 / (B * actors * steps * 2)
    let b = parts.len() as f64;
    let weights: Vec<T> = parts
        .iter()
        .flat_map(|ex| {
            let w = T::of(1.0 / (b * (ex.rows.len() * ex.horizon() * 2) as f64));
            std::iter::repeat_n(w, ex.rows.len())
        })
        .collect();
    let ex = Example::concat(&parts)?;
    check_graph(params, &ex.input)?;

    let cfg = &params.config;
    let slope = T::of(cfg.leaky_slope);
    let mut grad = params.zeros_like();
    let mut dropout = dropout_rng.map(|rng| Dropout { rate: cfg.dropout, rng });
    let (emb, enc_cache) = params.encoder.forward_cached(&ex.input, slope, dropout.as_mut())?;
    let z = emb.select(ndarray::Axis(0), &ex.rows);
    let dec = decode_batch(&z, ex.horizon(), &params.gru, dropout.as_mut())?;
    let roll = rollout(dec.outputs(), ex.current.clone(), &params.head, cfg);

    let two = T::of(2.0);
    let mut total = T::zero();
    let mut dpos = Vec::with_capacity(ex.horizon());
    for (pred, target) in roll.positions[1..].iter().zip(&ex.targets) {
        let mut diff = pred - target;
        for (mut row, &w) in diff.rows_mut().into_iter().zip(&weights) {
            total += row.iter().map(|&d| d * d).sum::<T>() * w;
            row *= two * w;
        }
        dpos.push(diff);
    }

    let dg = rollout_backward(&roll, &dpos, &params.head, cfg, &mut grad.head);
    let dz = decode_backward(&dec, dg, &params.gru, &mut grad.gru);
    let mut demb = Array2::zeros(emb.raw_dim());
    for (i, &r) in ex.rows.iter().enumerate() {
        let mut row = demb.row_mut(r);
        row += &dz.row(i);
    }
    params.encoder.backward(&ex.input, slope, &enc_cache, demb, &mut grad.encoder);
    Ok((total, grad))
}
