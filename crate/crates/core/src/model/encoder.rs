use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::gat::GatCache;
use super::{elu, elu_grad_from_output, Dense, Dropout, GraphInput, HeteroGatParams, ModelConfig, ModelError, Result, TensorRef};
use crate::Scalar;

/// Attention path and linear path of one encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub gat: HeteroGatParams<T>,
    pub linear: Dense<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub layers: Vec<EncoderLayer<T>>,
}

pub(crate) struct EncoderCache<T> {
    inputs: Vec<Array2<T>>,
    /// Post-activation (pre-dropout) outputs of the inner layers.
    activated: Vec<Array2<T>>,
    masks: Vec<Option<Array2<T>>>,
    gat: Vec<(GatCache<T>, GatCache<T>)>,
}

impl<T: Scalar> EncoderParams<T> {
    pub(crate) fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let layers = (0..config.layers)
            .map(|l| {
                let i = if l == 0 { config.input_dim } else { config.hidden };
                EncoderLayer {
                    gat: HeteroGatParams::init(i, config.hidden, rng),
                    linear: Dense::glorot(i, config.hidden, rng),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.gat.out_dim())
    }

    /// `Z_l = GAT_l(Z_{l-1}) + Linear_l(Z_{l-1})`, with ELU and dropout after
    /// every layer but the last.
    pub(crate) fn forward_cached(
        &self,
        graph: &GraphInput<T>,
        slope: T,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<(Array2<T>, EncoderCache<T>)> {
        if graph.features.ncols() != self.layers.first().map_or(0, |l| l.gat.in_dim()) {
            return Err(ModelError::Shape(format!("node features have width {}", graph.features.ncols())));
        }
        let mut cache = EncoderCache { inputs: Vec::new(), activated: Vec::new(), masks: Vec::new(), gat: Vec::new() };
        let mut h = graph.features.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (mut z, gc) = layer.gat.forward(&h, graph, slope);
            z += &layer.linear.forward(&h);
            cache.gat.push(gc);
            let input = std::mem::replace(&mut h, z);
            cache.inputs.push(input);
            if l < last {
                h.mapv_inplace(elu);
                let mask = dropout.as_deref_mut().and_then(|d| d.mask::<T>(h.nrows(), h.ncols()));
                cache.activated.push(h.clone());
                if let Some(m) = &mask {
                    h *= m;
                }
                cache.masks.push(mask);
            }
        }
        Ok((h, cache))
    }

    pub(crate) fn backward(
        &self,
        graph: &GraphInput<T>,
        slope: T,
        cache: &EncoderCache<T>,
        dout: Array2<T>,
        grad: &mut EncoderParams<T>,
    ) {
        let mut d = dout;
        for l in (0..self.layers.len()).rev() {
            if l < self.layers.len() - 1 {
                if let Some(m) = &cache.masks[l] {
                    d *= m;
                }
                d.zip_mut_with(&cache.activated[l], |g, &y| *g *= elu_grad_from_output(y));
            }
            let layer = &self.layers[l];
            let x = &cache.inputs[l];
            let gl = &mut grad.layers[l];
            let mut dx = layer.gat.backward(x, graph, slope, &cache.gat[l], &d, &mut gl.gat);
            dx += &layer.linear.backward(x, &d, &mut gl.linear);
            if l == 0 {
                break;
            }
            d = dx;
        }
    }

    pub(crate) fn visit<'a>(&'a self, out: &mut Vec<TensorRef<'a, T>>) {
        for (l, layer) in self.layers.iter().enumerate() {
            layer.gat.visit(&format!("encoder.{l}.gat"), out);
            layer.linear.visit(&format!("encoder.{l}.linear"), out);
        }
    }

    pub(crate) fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        for layer in &mut self.layers {
            layer.gat.visit_mut(out);
            layer.linear.visit_mut(out);
        }
    }
}

/// Embeds every node of the graph; returns `num_nodes x hidden`.
pub fn encoder_forward<T: Scalar>(
    graph: &GraphInput<T>,
    params: &EncoderParams<T>,
    leaky_slope: f64,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<Array2<T>> {
    Ok(params.forward_cached(graph, T::of(leaky_slope), dropout)?.0)
}
