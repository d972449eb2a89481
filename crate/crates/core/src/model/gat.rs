use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand_chacha::ChaCha8Rng;

use super::{glorot, push, EdgeSet, GraphInput, ModelError, Result, TensorRef};
use crate::Scalar;

/// Attention head of one edge relation.
///
/// `att` has length `2 * out + 1`: the first `out` entries score the target
/// node, the next `out` the neighbor, and the last one the edge attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct GatParams<T> {
    pub weight: Array2<T>,
    pub att: Array1<T>,
}

/// One attention head per relation; relation outputs are summed per node.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGatParams<T> {
    pub spatial: GatParams<T>,
    pub temporal: GatParams<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct GatCache<T> {
    proj: Array2<T>,
    /// Attention logits before the leaky activation, one per edge.
    logits: Vec<T>,
    pub(crate) alpha: Vec<T>,
}

impl<T: Scalar> GatParams<T> {
    pub(crate) fn init(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let att = glorot::<T>(2 * output + 1, 1, rng).into_shape_with_order(2 * output + 1).expect("column vector");
        Self { weight: glorot(input, output, rng), att }
    }

    fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn att_dst(&self) -> ArrayView1<'_, T> {
        self.att.slice(s![..self.out_dim()])
    }

    fn att_src(&self) -> ArrayView1<'_, T> {
        let o = self.out_dim();
        self.att.slice(s![o..2 * o])
    }

    fn att_edge(&self) -> T {
        self.att[2 * self.out_dim()]
    }

    pub(crate) fn forward(&self, h: &Array2<T>, edges: &EdgeSet<T>, slope: T) -> (Array2<T>, GatCache<T>) {
        let proj = h.dot(&self.weight);
        let score_dst = proj.dot(&self.att_dst());
        let score_src = proj.dot(&self.att_src());
        let a_edge = self.att_edge();
        let logits: Vec<T> = (0..edges.len())
            .map(|e| score_dst[edges.dst[e]] + score_src[edges.src[e]] + a_edge * edges.attr[e])
            .collect();
        let mut alpha = vec![T::zero(); edges.len()];
        let mut out = Array2::zeros((h.nrows(), self.out_dim()));
        for (p, inc) in edges.incoming.iter().enumerate() {
            if inc.is_empty() {
                continue;
            }
            let act = |e: usize| leaky(logits[e], slope);
            let max = inc.iter().map(|&e| act(e)).fold(T::neg_infinity(), T::max);
            let mut denom = T::zero();
            for &e in inc {
                alpha[e] = (act(e) - max).exp();
                denom += alpha[e];
            }
            let mut row = out.row_mut(p);
            for &e in inc {
                alpha[e] /= denom;
                row.scaled_add(alpha[e], &proj.row(edges.src[e]));
            }
        }
        (out, GatCache { proj, logits, alpha })
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub(crate) fn backward(
        &self,
        h: &Array2<T>,
        edges: &EdgeSet<T>,
        slope: T,
        cache: &GatCache<T>,
        dout: &Array2<T>,
        grad: &mut GatParams<T>,
    ) -> Array2<T> {
        let n = h.nrows();
        let o = self.out_dim();
        let mut dproj = Array2::<T>::zeros((n, o));
        let mut dscore_dst = Array1::<T>::zeros(n);
        let mut dscore_src = Array1::<T>::zeros(n);
        let mut da_edge = T::zero();
        for (p, inc) in edges.incoming.iter().enumerate() {
            if inc.is_empty() {
                continue;
            }
            let dp = dout.row(p);
            let dalpha: Vec<T> = inc.iter().map(|&e| dp.dot(&cache.proj.row(edges.src[e]))).collect();
            let weighted: T = inc.iter().zip(&dalpha).map(|(&e, &d)| cache.alpha[e] * d).sum();
            for (&e, &d) in inc.iter().zip(&dalpha) {
                let q = edges.src[e];
                dproj.row_mut(q).scaled_add(cache.alpha[e], &dp);
                let dlogit = cache.alpha[e] * (d - weighted) * leaky_grad(cache.logits[e], slope);
                dscore_dst[p] += dlogit;
                dscore_src[q] += dlogit;
                da_edge += dlogit * edges.attr[e];
            }
        }
        {
            let mut g = grad.att.slice_mut(s![..o]);
            g += &cache.proj.t().dot(&dscore_dst);
        }
        {
            let mut g = grad.att.slice_mut(s![o..2 * o]);
            g += &cache.proj.t().dot(&dscore_src);
        }
        grad.att[2 * o] += da_edge;
        dproj += &outer(&dscore_dst, self.att_dst());
        dproj += &outer(&dscore_src, self.att_src());
        grad.weight += &h.t().dot(&dproj);
        dproj.dot(&self.weight.t())
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a, T>>) {
        push(out, format!("{prefix}.weight"), &self.weight);
        push(out, format!("{prefix}.att"), &self.att);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        out.push(self.weight.as_slice_mut().expect("standard layout"));
        out.push(self.att.as_slice_mut().expect("standard layout"));
    }
}

impl<T: Scalar> HeteroGatParams<T> {
    pub(crate) fn init(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Self { spatial: GatParams::init(input, output, rng), temporal: GatParams::init(input, output, rng) }
    }

    pub fn in_dim(&self) -> usize {
        self.spatial.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.spatial.weight.ncols()
    }

    pub(crate) fn forward(
        &self,
        h: &Array2<T>,
        graph: &GraphInput<T>,
        slope: T,
    ) -> (Array2<T>, (GatCache<T>, GatCache<T>)) {
        let (mut out, cs) = self.spatial.forward(h, &graph.spatial, slope);
        let (ot, ct) = self.temporal.forward(h, &graph.temporal, slope);
        out += &ot;
        (out, (cs, ct))
    }

    pub(crate) fn backward(
        &self,
        h: &Array2<T>,
        graph: &GraphInput<T>,
        slope: T,
        cache: &(GatCache<T>, GatCache<T>),
        dout: &Array2<T>,
        grad: &mut HeteroGatParams<T>,
    ) -> Array2<T> {
        let mut dh = self.spatial.backward(h, &graph.spatial, slope, &cache.0, dout, &mut grad.spatial);
        dh += &self.temporal.backward(h, &graph.temporal, slope, &cache.1, dout, &mut grad.temporal);
        dh
    }

    pub(crate) fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a, T>>) {
        self.spatial.visit(&format!("{prefix}.spatial"), out);
        self.temporal.visit(&format!("{prefix}.temporal"), out);
    }

    pub(crate) fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        self.spatial.visit_mut(out);
        self.temporal.visit_mut(out);
    }
}

fn outer<T: Scalar>(a: &Array1<T>, b: ArrayView1<'_, T>) -> Array2<T> {
    a.view().insert_axis(Axis(1)).dot(&b.insert_axis(Axis(0)))
}

#[inline]
fn leaky<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        x * slope
    }
}

#[inline]
fn leaky_grad<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        slope
    }
}

fn check_dims<T: Scalar>(h: &Array2<T>, graph: &GraphInput<T>, params: &HeteroGatParams<T>) -> Result<()> {
    if h.ncols() != params.in_dim() {
        return Err(ModelError::Shape(format!("embedding width {} != layer input {}", h.ncols(), params.in_dim())));
    }
    if h.nrows() != graph.num_nodes() {
        return Err(ModelError::Shape(format!("{} embeddings for {} nodes", h.nrows(), graph.num_nodes())));
    }
    if params.temporal.weight.dim() != params.spatial.weight.dim() {
        return Err(ModelError::Shape("relation weights differ in shape".into()));
    }
    Ok(())
}

/// One heterogeneous attention layer: per relation, softmax-normalized
/// attention over each node's incoming edges, summed across relations.
/// Nodes without incoming edges in a relation receive zero from it.
pub fn gat_layer_forward<T: Scalar>(
    embeddings: &Array2<T>,
    graph: &GraphInput<T>,
    params: &HeteroGatParams<T>,
    leaky_slope: f64,
) -> Result<Array2<T>> {
    check_dims(embeddings, graph, params)?;
    Ok(params.forward(embeddings, graph, T::of(leaky_slope)).0)
}

/// Attention coefficients per edge, `(spatial, temporal)`, in edge order.
pub fn attention_coefficients<T: Scalar>(
    embeddings: &Array2<T>,
    graph: &GraphInput<T>,
    params: &HeteroGatParams<T>,
    leaky_slope: f64,
) -> Result<(Vec<T>, Vec<T>)> {
    check_dims(embeddings, graph, params)?;
    let (_, (cs, ct)) = params.forward(embeddings, graph, T::of(leaky_slope));
    Ok((cs.alpha, ct.alpha))
}
