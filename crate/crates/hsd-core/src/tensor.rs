//! Dense kernels with a fixed iteration and summation order.
//!
//! Every accumulation walks indices in ascending order, so a given scalar
//! type yields bit-identical results across runs and across structurally
//! different callers (incremental decode vs. whole-sequence recompute).

use crate::scalar::Scalar;

/// `out = x * weight (+ bias)` with `weight` row-major `[in_dim, out_dim]`.
/// Each `out[j]` accumulates over `i` in ascending order.
pub fn matvec<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: Option<&[T]>,
    in_dim: usize,
    out_dim: usize,
    out: &mut [T],
) {
    debug_assert_eq!(x.len(), in_dim);
    debug_assert_eq!(weight.len(), in_dim * out_dim);
    debug_assert_eq!(out.len(), out_dim);
    match bias {
        Some(bias) => out.copy_from_slice(bias),
        None => out.fill(T::zero()),
    }
    for (i, &xi) in x.iter().enumerate() {
        let row = &weight[i * out_dim..(i + 1) * out_dim];
        for (o, &w) in out.iter_mut().zip(row.iter()) {
            *o += xi * w;
        }
    }
}

/// Standard layer norm with biased variance:
/// `out = (x - mean) / sqrt(var + eps) * gamma + beta`.
pub fn layer_norm<T: Scalar>(x: &[T], gamma: &[T], beta: &[T], eps: T, out: &mut [T]) {
    let n = T::from_usize(x.len()).unwrap();
    let mut sum = T::zero();
    for &v in x {
        sum += v;
    }
    let mean = sum / n;
    let mut var_sum = T::zero();
    for &v in x {
        let d = v - mean;
        var_sum += d * d;
    }
    let denom = (var_sum / n + eps).sqrt();
    for i in 0..x.len() {
        out[i] = (x[i] - mean) / denom * gamma[i] + beta[i];
    }
}

/// In-place numerically shifted softmax.
pub fn softmax_in_place<T: Scalar>(xs: &mut [T]) {
    let mut max = T::neg_infinity();
    for &v in xs.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in xs.iter_mut() {
        *v /= sum;
    }
}

/// Gaussian error linear unit, tanh approximation.
pub fn gelu<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5).unwrap();
    let sqrt_2_over_pi = T::from_f64(0.7978845608028654).unwrap();
    let coeff = T::from_f64(0.044715).unwrap();
    let x3 = x * x * x;
    half * x * (T::one() + (sqrt_2_over_pi * (x + coeff * x3)).tanh())
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    let mut best_val = xs[0];
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

pub fn all_finite<T: Scalar>(xs: &[T]) -> bool {
    xs.iter().all(|v| v.is_finite())
}
