use ndarray::{concatenate, s, Array2, ArrayView1, Axis};
use rand_chacha::ChaCha8Rng;

use super::{elu, elu_grad_from_output, Dense, ModelConfig, ModelError, Result, TensorRef};
use crate::Scalar;

/// Multi-layer perceptron with ELU hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub layers: Vec<Dense<T>>,
}

pub(crate) struct MlpCache<T> {
    /// Input of every layer; entries after the first are post-activation.
    inputs: Vec<Array2<T>>,
}

impl<T: Scalar> MlpParams<T> {
    pub(crate) fn init(input: usize, hidden: &[usize], output: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &w in hidden.iter().chain(std::iter::once(&output)) {
            layers.push(Dense::glorot(prev, w, rng));
            prev = w;
        }
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub(crate) fn forward_cached(&self, x: Array2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut cache = MlpCache { inputs: Vec::with_capacity(self.layers.len()) };
        let mut h = x;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(&h);
            if l < last {
                y.mapv_inplace(elu);
            }
            cache.inputs.push(std::mem::replace(&mut h, y));
        }
        (h, cache)
    }

    pub(crate) fn backward(&self, cache: &MlpCache<T>, dout: Array2<T>, grad: &mut MlpParams<T>) -> Array2<T> {
        let mut d = dout;
        for l in (0..self.layers.len()).rev() {
            d = self.layers[l].backward(&cache.inputs[l], &d, &mut grad.layers[l]);
            if l > 0 {
                d.zip_mut_with(&cache.inputs[l], |g, &y| *g *= elu_grad_from_output(y));
            }
        }
        d
    }

    pub(crate) fn visit<'a>(&'a self, out: &mut Vec<TensorRef<'a, T>>) {
        for (l, layer) in self.layers.iter().enumerate() {
            layer.visit(&format!("head.{l}"), out);
        }
    }

    pub(crate) fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        for layer in &mut self.layers {
            layer.visit_mut(out);
        }
    }
}

fn scaling<T: Scalar>(config: &ModelConfig) -> ([T; 2], [T; 2]) {
    let [[gx, ox], [gy, oy]] = config.position_scaling;
    ([T::of(gx), T::of(gy)], [T::of(ox), T::of(oy)])
}

fn head_input<T: Scalar>(g: &Array2<T>, prev: &Array2<T>, config: &ModelConfig) -> Array2<T> {
    if !config.concat {
        return g.clone();
    }
    let (gain, offset) = scaling::<T>(config);
    let mut p = prev.clone();
    for mut row in p.rows_mut() {
        row[0] = gain[0] * row[0] + offset[0];
        row[1] = gain[1] * row[1] + offset[1];
    }
    concatenate(Axis(1), &[g.view(), p.view()]).expect("equal row counts")
}

/// One output step: returns the next position in meters,
/// `prev + MLP([g ‖ scaled(prev)])` (or `prev + MLP(g)` without concatenation).
pub fn output_step<T: Scalar>(
    g: ArrayView1<'_, T>,
    prev: [T; 2],
    params: &MlpParams<T>,
    config: &ModelConfig,
) -> Result<[T; 2]> {
    if g.len() + if config.concat { 2 } else { 0 } != params.input_dim() {
        return Err(ModelError::Shape(format!("head input width {} with concat={}", params.input_dim(), config.concat)));
    }
    let g = g.to_owned().insert_axis(Axis(0));
    let prev_m = Array2::from_shape_vec((1, 2), prev.to_vec()).expect("1x2");
    let (delta, _) = params.forward_cached(head_input(&g, &prev_m, config));
    Ok([prev[0] + delta[(0, 0)], prev[1] + delta[(0, 1)]])
}

pub(crate) struct RolloutCache<T> {
    mlp: Vec<MlpCache<T>>,
    /// `positions[k]` is `rows x 2`; index 0 is the seed position.
    pub(crate) positions: Vec<Array2<T>>,
}

/// Rolls the head over decoder outputs, seeded with the current positions.
pub(crate) fn rollout<'a, T: Scalar>(
    gs: impl Iterator<Item = &'a Array2<T>>,
    start: Array2<T>,
    params: &MlpParams<T>,
    config: &ModelConfig,
) -> RolloutCache<T> {
    let mut cache = RolloutCache { mlp: Vec::new(), positions: vec![start] };
    for g in gs {
        let prev = cache.positions.last().expect("seeded");
        let (delta, mc) = params.forward_cached(head_input(g, prev, config));
        let next = prev + &delta;
        cache.mlp.push(mc);
        cache.positions.push(next);
    }
    cache
}

/// `dpos[k]` is the loss gradient w.r.t. predicted position `k + 1`.
/// Returns the gradients w.r.t. every decoder output `g_1 .. g_K`.
pub(crate) fn rollout_backward<T: Scalar>(
    cache: &RolloutCache<T>,
    dpos: &[Array2<T>],
    params: &MlpParams<T>,
    config: &ModelConfig,
    grad: &mut MlpParams<T>,
) -> Vec<Array2<T>> {
    let k_total = cache.mlp.len();
    let hid = params.input_dim() - if config.concat { 2 } else { 0 };
    let (gain, _) = scaling::<T>(config);
    let mut dg = vec![Array2::zeros((0, 0)); k_total];
    let mut carry = Array2::<T>::zeros(dpos[0].raw_dim());
    for k in (0..k_total).rev() {
        carry += &dpos[k];
        let din = params.backward(&cache.mlp[k], carry.clone(), grad);
        dg[k] = din.slice(s![.., ..hid]).to_owned();
        if config.concat {
            for (mut c, d) in carry.rows_mut().into_iter().zip(din.rows()) {
                c[0] += d[hid] * gain[0];
                c[1] += d[hid + 1] * gain[1];
            }
        }
    }
    dg
}
