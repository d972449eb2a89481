use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand_chacha::ChaCha8Rng;

use super::linalg::{mm, mm_at, mm_bt};
use super::{glorot, push, Dropout, ModelError, Result, TensorRef};
use crate::Scalar;

/// Bias-free GRU cell with a squashed output projection:
///
/// ```text
/// r  = sigmoid(x W_rx + h W_rh)
/// u  = sigmoid(x W_ux + h W_uh)
/// c  = tanh(x W_cx + (r * h) W_ch)
/// h' = u * h + (1 - u) * c
/// y  = sigmoid(h' W_y)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w_rx: Array2<T>,
    pub w_rh: Array2<T>,
    pub w_ux: Array2<T>,
    pub w_uh: Array2<T>,
    pub w_cx: Array2<T>,
    pub w_ch: Array2<T>,
    pub w_y: Array2<T>,
}

pub(crate) struct GruStep<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    r: Array2<T>,
    u: Array2<T>,
    c: Array2<T>,
    pub(crate) h: Array2<T>,
    pub(crate) y: Array2<T>,
}

impl<T: Scalar> GruParams<T> {
    pub(crate) fn init(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w_rx: glorot(input, hidden, rng),
            w_rh: glorot(hidden, hidden, rng),
            w_ux: glorot(input, hidden, rng),
            w_uh: glorot(hidden, hidden, rng),
            w_cx: glorot(input, hidden, rng),
            w_ch: glorot(hidden, hidden, rng),
            w_y: glorot(hidden, output, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_rx.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_rh.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_y.ncols()
    }

    pub(crate) fn step(&self, x: Array2<T>, h_prev: Array2<T>) -> GruStep<T> {
        let r = (mm(&x.view(), &self.w_rx.view()) + mm(&h_prev.view(), &self.w_rh.view())).mapv_into(T::sigmoid);
        let u = (mm(&x.view(), &self.w_ux.view()) + mm(&h_prev.view(), &self.w_uh.view())).mapv_into(T::sigmoid);
        let c = (mm(&x.view(), &self.w_cx.view()) + mm(&(&r * &h_prev).view(), &self.w_ch.view())).mapv_into(T::tanh);
        let h = &u * &h_prev + &u.mapv(|v| T::one() - v) * &c;
        let y = mm(&h.view(), &self.w_y.view()).mapv_into(T::sigmoid);
        GruStep { x, h_prev, r, u, c, h, y }
    }

    /// Returns `(dx, dh_prev)` and accumulates parameter gradients.
    pub(crate) fn step_backward(
        &self,
        s: &GruStep<T>,
        dy: &Array2<T>,
        dh: &Array2<T>,
        grad: &mut GruParams<T>,
    ) -> (Array2<T>, Array2<T>) {
        let one = T::one();
        let dpre_y = dy * &s.y.mapv(|y| y * (one - y));
        grad.w_y += &mm_at(&s.h.view(), &dpre_y.view());
        let dh_total = dh + &mm_bt(&dpre_y.view(), &self.w_y.view());

        let du = &dh_total * &(&s.h_prev - &s.c);
        let dc = &dh_total * &s.u.mapv(|u| one - u);
        let mut dh_prev = &dh_total * &s.u;

        let dpre_c = dc * &s.c.mapv(|c| one - c * c);
        let rh = &s.r * &s.h_prev;
        grad.w_cx += &mm_at(&s.x.view(), &dpre_c.view());
        grad.w_ch += &mm_at(&rh.view(), &dpre_c.view());
        let drh = mm_bt(&dpre_c.view(), &self.w_ch.view());
        let dr = &drh * &s.h_prev;
        dh_prev += &(&drh * &s.r);
        let mut dx = mm_bt(&dpre_c.view(), &self.w_cx.view());

        let dpre_u = du * &s.u.mapv(|u| u * (one - u));
        grad.w_ux += &mm_at(&s.x.view(), &dpre_u.view());
        grad.w_uh += &mm_at(&s.h_prev.view(), &dpre_u.view());
        dx += &mm_bt(&dpre_u.view(), &self.w_ux.view());
        dh_prev += &mm_bt(&dpre_u.view(), &self.w_uh.view());

        let dpre_r = dr * &s.r.mapv(|r| r * (one - r));
        grad.w_rx += &mm_at(&s.x.view(), &dpre_r.view());
        grad.w_rh += &mm_at(&s.h_prev.view(), &dpre_r.view());
        dx += &mm_bt(&dpre_r.view(), &self.w_rx.view());
        dh_prev += &mm_bt(&dpre_r.view(), &self.w_rh.view());
        (dx, dh_prev)
    }

    pub(crate) fn visit<'a>(&'a self, out: &mut Vec<TensorRef<'a, T>>) {
        for (name, w) in [
            ("w_rx", &self.w_rx),
            ("w_rh", &self.w_rh),
            ("w_ux", &self.w_ux),
            ("w_uh", &self.w_uh),
            ("w_cx", &self.w_cx),
            ("w_ch", &self.w_ch),
            ("w_y", &self.w_y),
        ] {
            push(out, format!("gru.{name}"), w);
        }
    }

    pub(crate) fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        for w in [
            &mut self.w_rx,
            &mut self.w_rh,
            &mut self.w_ux,
            &mut self.w_uh,
            &mut self.w_cx,
            &mut self.w_ch,
            &mut self.w_y,
        ] {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
    }
}

/// Runs one GRU step on single vectors, returning `(y, h')`.
pub fn gru_cell<T: Scalar>(x: ArrayView1<'_, T>, h: ArrayView1<'_, T>, params: &GruParams<T>) -> Result<(Array1<T>, Array1<T>)> {
    if x.len() != params.input_dim() || h.len() != params.hidden_dim() {
        return Err(ModelError::Shape(format!(
            "gru expects input {} / hidden {}, got {} / {}",
            params.input_dim(),
            params.hidden_dim(),
            x.len(),
            h.len()
        )));
    }
    let s = params.step(x.to_owned().insert_axis(Axis(0)), h.to_owned().insert_axis(Axis(0)));
    Ok((s.y.row(0).to_owned(), s.h.row(0).to_owned()))
}

pub(crate) struct DecoderCache<T> {
    pub(crate) steps: Vec<GruStep<T>>,
    masks: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> DecoderCache<T> {
    /// Decoded states `g_1 .. g_K`, each `rows x out`.
    pub(crate) fn outputs(&self) -> impl Iterator<Item = &Array2<T>> {
        self.steps.iter().map(|s| &s.y)
    }
}

/// Decodes a batch of current-step embeddings (one row per actor).
///
/// The hidden state starts at zero. Step 1 consumes `z`, step 2 `z + g_1`,
/// and step `k >= 3` consumes `g_{k-1} + g_{k-2}`.
pub(crate) fn decode_batch<T: Scalar>(
    z: &Array2<T>,
    horizon: usize,
    params: &GruParams<T>,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Result<DecoderCache<T>> {
    if horizon < 1 {
        return Err(ModelError::Argument("prediction horizon must be >= 1".into()));
    }
    if z.ncols() != params.input_dim() || params.output_dim() != params.input_dim() {
        return Err(ModelError::Shape(format!(
            "decoder input width {} incompatible with gru {}x{}",
            z.ncols(),
            params.input_dim(),
            params.output_dim()
        )));
    }
    let rows = z.nrows();
    let mut cache = DecoderCache { steps: Vec::with_capacity(horizon), masks: Vec::with_capacity(horizon) };
    let mut h = Array2::zeros((rows, params.hidden_dim()));
    for k in 0..horizon {
        let mut x = match k {
            0 => z.clone(),
            1 => z + &cache.steps[0].y,
            _ => &cache.steps[k - 1].y + &cache.steps[k - 2].y,
        };
        let mask = dropout.as_deref_mut().and_then(|d| d.mask::<T>(rows, x.ncols()));
        if let Some(m) = &mask {
            x *= m;
        }
        cache.masks.push(mask);
        let s = params.step(x, h);
        h = s.h.clone();
        cache.steps.push(s);
    }
    Ok(cache)
}

/// Back-propagates `dg[k] = dL/dg_{k+1}` through the decoder; returns `dL/dz`.
pub(crate) fn decode_backward<T: Scalar>(
    cache: &DecoderCache<T>,
    dg: Vec<Array2<T>>,
    params: &GruParams<T>,
    grad: &mut GruParams<T>,
) -> Array2<T> {
    let k_total = cache.steps.len();
    let mut dg = dg;
    let rows = cache.steps[0].y.nrows();
    let mut dz = Array2::zeros((rows, params.input_dim()));
    let mut dh = Array2::zeros((rows, params.hidden_dim()));
    for k in (0..k_total).rev() {
        let (mut dx, dh_prev) = params.step_backward(&cache.steps[k], &dg[k], &dh, grad);
        dh = dh_prev;
        if let Some(m) = &cache.masks[k] {
            dx *= m;
        }
        match k {
            0 => dz += &dx,
            1 => {
                dz += &dx;
                dg[0] += &dx;
            }
            _ => {
                dg[k - 1] += &dx;
                dg[k - 2] += &dx;
            }
        }
    }
    dz
}

/// Decodes one embedding into `horizon` states `g_1 .. g_horizon`.
pub fn decode_sequence<T: Scalar>(z: ArrayView1<'_, T>, horizon: usize, params: &GruParams<T>) -> Result<Vec<Array1<T>>> {
    let cache = decode_batch(&z.to_owned().insert_axis(Axis(0)), horizon, params, None)?;
    Ok(cache.outputs().map(|y| y.row(0).to_owned()).collect())
}
