//! The trajectory network: a heterogeneous graph-attention encoder with a
//! parallel linear path, a GRU decoder with residual input chaining, and an
//! MLP head that predicts per-step displacements.
//!
//! Activations are row-major batches (`rows x features`) and every weight is
//! stored `in x out`, so a dense layer is `x.dot(W) + b`. Each forward pass
//! has a cached variant and a matching backward pass; gradients are
//! accumulated into a [`ModelParams`] of the same shape.

use ndarray::{Array, Array1, Array2, Dimension};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::HeteroGraph;
use crate::traj::FeatureScaler;
use crate::Scalar;

mod checkpoint;
mod encoder;
mod forward;
mod gat;
mod gru;
mod head;
mod linalg;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor, CHECKPOINT_FORMAT};
pub use encoder::{encoder_forward, EncoderLayer, EncoderParams};
pub use forward::{extract_current, loss_and_gradients, predict_actor, predict_all, predict_example, predict_from_embeddings, Example};
pub use gat::{attention_coefficients, gat_layer_forward, GatParams, HeteroGatParams};
pub use gru::{decode_sequence, gru_cell, GruParams};
pub use head::{output_step, MlpParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("actor {actor_id} has no node at step {step}")]
    MissingActor { actor_id: u64, step: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Architecture and regularization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of encoder layers (GAT + linear pairs).
    pub layers: usize,
    pub input_dim: usize,
    /// Width of node embeddings, GRU input, hidden state and output.
    pub hidden: usize,
    /// Hidden widths of the output MLP; its output is always 2.
    pub mlp_hidden: Vec<usize>,
    /// Feed the previous position to the MLP alongside the decoder state.
    pub concat: bool,
    pub dropout: f64,
    /// Negative slope of the attention logit activation.
    pub leaky_slope: f64,
    /// `scaled = gain * meters + offset` for x and y, applied to the previous
    /// position before it enters the MLP.
    pub position_scaling: [[f64; 2]; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            input_dim: 4,
            hidden: 64,
            mlp_hidden: vec![64, 32],
            concat: true,
            dropout: 0.05,
            leaky_slope: 0.2,
            position_scaling: [[1.0, 0.0], [1.0, 0.0]],
        }
    }
}

impl ModelConfig {
    /// Width of the MLP input.
    pub fn head_input_dim(&self) -> usize {
        self.hidden + if self.concat { 2 } else { 0 }
    }

    pub fn with_scaler(mut self, scaler: &FeatureScaler) -> Self {
        let coef = |r: &crate::traj::FeatureRange| [r.gain(), r.lo - r.min * r.gain()];
        self.position_scaling = [coef(&scaler.x), coef(&scaler.y)];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.input_dim == 0 {
            return Err(ModelError::Argument("layers, hidden and input_dim must be >= 1".into()));
        }
        if self.mlp_hidden.iter().any(|&w| w == 0) {
            return Err(ModelError::Argument("MLP widths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Argument(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Fully connected layer `x.dot(weight) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Array2::zeros((input, output)), bias: Array1::zeros(output) }
    }

    fn glorot(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Self { weight: glorot(input, output, rng), bias: Array1::zeros(output) }
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        linalg::mm(&x.view(), &self.weight.view()) + &self.bias
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub(crate) fn backward(&self, x: &Array2<T>, dy: &Array2<T>, grad: &mut Dense<T>) -> Array2<T> {
        grad.weight += &linalg::mm_at(&x.view(), &dy.view());
        grad.bias += &dy.sum_axis(ndarray::Axis(0));
        linalg::mm_bt(&dy.view(), &self.weight.view())
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a, T>>) {
        push(out, format!("{prefix}.weight"), &self.weight);
        push(out, format!("{prefix}.bias"), &self.bias);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        out.push(self.weight.as_slice_mut().expect("standard layout"));
        out.push(self.bias.as_slice_mut().expect("standard layout"));
    }
}

pub(crate) fn glorot<T: Scalar>(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let a = (6.0 / (input + output) as f64).sqrt();
    Array2::from_shape_simple_fn((input, output), || T::of(rng.random_range(-a..a)))
}

/// `(name, shape, values)` view of one parameter tensor.
pub type TensorRef<'a, T> = (String, Vec<usize>, &'a [T]);

pub(crate) fn push<'a, T, D: Dimension>(out: &mut Vec<TensorRef<'a, T>>, name: String, a: &'a Array<T, D>) {
    out.push((name, a.shape().to_vec(), a.as_slice().expect("standard layout")));
}

/// Every trainable tensor of the network plus its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub encoder: EncoderParams<T>,
    pub gru: GruParams<T>,
    pub head: MlpParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::init(&config, &mut rng);
        let gru = GruParams::init(config.hidden, config.hidden, config.hidden, &mut rng);
        let head = MlpParams::init(config.head_input_dim(), &config.mlp_hidden, 2, &mut rng);
        Ok(Self { config, encoder, gru, head })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = Vec::new();
        self.encoder.visit(&mut out);
        self.gru.visit(&mut out);
        self.head.visit(&mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        self.encoder.visit_mut(&mut out);
        self.gru.visit_mut(&mut out);
        self.head.visit_mut(&mut out);
        out
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors().iter().flat_map(|t| t.2.iter().copied()).collect()
    }

    pub fn assign_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(ModelError::Shape(format!("expected {} values, got {}", self.param_count(), flat.len())));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b.2) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|x| x.is_finite()))
    }

    /// Converts every tensor to another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::init(self.config.clone(), 0).expect("config already validated");
        let flat: Vec<U> = self.flatten().into_iter().map(|x| U::of(x.as_f64())).collect();
        out.assign_flat(&flat).expect("same architecture");
        out
    }
}

/// Parameter count of an architecture without materializing it.
pub fn param_count(config: &ModelConfig) -> usize {
    let h = config.hidden;
    let gat = |i: usize| 2 * (i * h + 2 * h + 1);
    let encoder: usize = (0..config.layers)
        .map(|l| {
            let i = if l == 0 { config.input_dim } else { h };
            gat(i) + i * h + h
        })
        .sum();
    let gru = 7 * h * h;
    let mut head = 0;
    let mut prev = config.head_input_dim();
    for &w in config.mlp_hidden.iter().chain(std::iter::once(&2)) {
        head += prev * w + w;
        prev = w;
    }
    encoder + gru + head
}

/// Incoming-edge lists of one relation.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet<T> {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub attr: Vec<T>,
    /// Edge indices grouped by destination node.
    pub incoming: Vec<Vec<usize>>,
}

impl<T: Scalar> EdgeSet<T> {
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        Self::from_typed(num_nodes, edges.into_iter().map(|(a, b, w)| (a, b, T::of(w))).collect())
    }

    pub(crate) fn from_typed(num_nodes: usize, edges: Vec<(usize, usize, T)>) -> Self {
        let mut s = Self { src: Vec::new(), dst: Vec::new(), attr: Vec::new(), incoming: vec![Vec::new(); num_nodes] };
        for (a, b, w) in edges {
            s.incoming[b].push(s.src.len());
            s.src.push(a);
            s.dst.push(b);
            s.attr.push(w);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// Tensor view of a [`HeteroGraph`]: node features and both edge relations.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput<T> {
    pub features: Array2<T>,
    pub spatial: EdgeSet<T>,
    pub temporal: EdgeSet<T>,
}

impl<T: Scalar> GraphInput<T> {
    pub fn from_graph(g: &HeteroGraph) -> Self {
        let n = g.num_nodes();
        let features = Array2::from_shape_fn((n, 4), |(i, j)| T::of(g.nodes[i].features[j]));
        let spatial = EdgeSet::new(n, g.spatial_edges.iter().map(|e| (e.src, e.dst, e.attr)));
        let temporal = EdgeSet::new(n, g.temporal_edges.iter().map(|e| (e.src, e.dst, e.dt)));
        Self { features, spatial, temporal }
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)`.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

impl Dropout<'_> {
    pub(crate) fn mask<T: Scalar>(&mut self, rows: usize, cols: usize) -> Option<Array2<T>> {
        if self.rate <= 0.0 {
            return None;
        }
        let keep = T::of(1.0 / (1.0 - self.rate));
        let rate = self.rate;
        let rng = &mut *self.rng;
        Some(Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < rate { T::zero() } else { keep }))
    }
}

#[inline]
pub(crate) fn elu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp() - T::one()
    }
}

/// Derivative of ELU expressed through its output.
#[inline]
pub(crate) fn elu_grad_from_output<T: Scalar>(y: T) -> T {
    if y > T::zero() {
        T::one()
    } else {
        y + T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_linear_count() {
        let d = Dense::<f64>::zeros(4, 64);
        assert_eq!(d.weight.len() + d.bias.len(), 320);
    }

    #[test]
    fn reference_count_matches_formula_and_is_stable() {
        let p = ModelParams::<f64>::init(ModelConfig::default(), 1).unwrap();
        // encoder: (770 + 320) + (8450 + 4160), GRU: 7 * 64 * 64, head: 4288 + 2080 + 66
        assert_eq!(p.param_count(), 48_806);
        assert_eq!(param_count(&ModelConfig::default()), 48_806);
        let q = ModelParams::<f64>::init(ModelConfig::default(), 2).unwrap();
        assert_ne!(p.flatten(), q.flatten());
        assert_eq!(q.param_count(), 48_806);
        let no_concat = ModelConfig { concat: false, ..Default::default() };
        assert_eq!(param_count(&no_concat), 48_806 - 2 * 64);
    }

    #[test]
    fn flat_round_trip_and_cast() {
        let p = ModelParams::<f64>::init(ModelConfig { hidden: 8, mlp_hidden: vec![8], ..Default::default() }, 3).unwrap();
        let mut q = p.zeros_like();
        q.assign_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
        let f: ModelParams<f32> = p.cast();
        assert_eq!(f.param_count(), p.param_count());
        assert!(q.assign_flat(&[0.0; 3]).is_err());
    }
}
