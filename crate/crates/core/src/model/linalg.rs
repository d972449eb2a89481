//! Matrix products tuned for the short, wide operands of the decoder.
//!
//! The general-purpose kernel behind `ndarray::dot` packs its operands, which
//! dominates the cost when one side has only a handful of rows. Below
//! `SMALL_ROWS` rows these routines use plain row-major loops instead.

use ndarray::{Array2, ArrayView2};

use crate::Scalar;

const SMALL_ROWS: usize = 24;

fn rows<'a, T: Scalar>(a: &'a ArrayView2<'_, T>) -> Option<&'a [T]> {
    a.as_slice()
}

/// `a · b`.
pub(crate) fn mm<T: Scalar>(a: &ArrayView2<'_, T>, b: &ArrayView2<'_, T>) -> Array2<T> {
    let (m, k) = a.dim();
    let n = b.ncols();
    match (rows(a), rows(b)) {
        (Some(sa), Some(sb)) if m <= SMALL_ROWS => {
            let mut out = vec![T::zero(); m * n];
            for i in 0..m {
                let o = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let x = sa[i * k + p];
                    let br = &sb[p * n..(p + 1) * n];
                    for (c, &y) in o.iter_mut().zip(br) {
                        *c += x * y;
                    }
                }
            }
            Array2::from_shape_vec((m, n), out).expect("m x n")
        }
        _ => a.dot(b),
    }
}

/// `a · bᵀ`.
pub(crate) fn mm_bt<T: Scalar>(a: &ArrayView2<'_, T>, b: &ArrayView2<'_, T>) -> Array2<T> {
    let (m, k) = a.dim();
    let n = b.nrows();
    match (rows(a), rows(b)) {
        (Some(sa), Some(sb)) if m <= SMALL_ROWS => {
            let mut out = Vec::with_capacity(m * n);
            for i in 0..m {
                let ar = &sa[i * k..(i + 1) * k];
                for j in 0..n {
                    out.push(dot(ar, &sb[j * k..(j + 1) * k]));
                }
            }
            Array2::from_shape_vec((m, n), out).expect("m x n")
        }
        _ => a.dot(&b.t()),
    }
}

/// `aᵀ · b`, where `a` and `b` share their (small) row count.
pub(crate) fn mm_at<T: Scalar>(a: &ArrayView2<'_, T>, b: &ArrayView2<'_, T>) -> Array2<T> {
    let (m, k) = a.dim();
    let n = b.ncols();
    match (rows(a), rows(b)) {
        (Some(sa), Some(sb)) if m <= SMALL_ROWS => {
            let mut out = vec![T::zero(); k * n];
            for i in 0..m {
                let br = &sb[i * n..(i + 1) * n];
                for p in 0..k {
                    let x = sa[i * k + p];
                    let o = &mut out[p * n..(p + 1) * n];
                    for (c, &y) in o.iter_mut().zip(br) {
                        *c += x * y;
                    }
                }
            }
            Array2::from_shape_vec((k, n), out).expect("k x n")
        }
        _ => a.t().dot(b),
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn kernels_agree_with_ndarray() {
        let a = Array2::from_shape_fn((5, 7), |(i, j)| (i * 7 + j) as f64 * 0.1 - 1.3);
        let b = Array2::from_shape_fn((7, 9), |(i, j)| ((i + 2 * j) % 5) as f64 - 2.0);
        let c = Array2::from_shape_fn((9, 7), |(i, j)| (i as f64 - j as f64) * 0.3);
        let d = Array2::from_shape_fn((5, 9), |(i, j)| (i * j) as f64 * 0.05);
        let close = |x: &Array2<f64>, y: &Array2<f64>| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&mm(&a.view(), &b.view()), &a.dot(&b)));
        assert!(close(&mm_bt(&a.view(), &c.view()), &a.dot(&c.t())));
        assert!(close(&mm_at(&a.view(), &d.view()), &a.t().dot(&d)));
        let tall = Array2::from_shape_fn((40, 7), |(i, j)| (i + j) as f64);
        assert!(close(&mm(&tall.view(), &b.view()), &tall.dot(&b)));
    }
}
