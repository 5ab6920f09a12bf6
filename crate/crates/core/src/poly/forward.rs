//! Low-rank forward pass.
//!
//! For class `c` the logit is
//! `b_c + <u1_c, x> + sum_l sum_i lambda_{l,i,c} * <u_{l,i}, x~_l>^l`
//! with `x~_l = sign(x) |x|^(1/l)`. Projections onto the shared bases are
//! computed once and reused by every class, so one evaluation costs
//! `O(d * sum(r) + C * sum(r))`.

use super::params::SpamParams;
use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::par;

/// `sign(v) * |v|^(1/order)` with `sign(0) = 0`.
#[inline]
pub fn rescale_value(v: f64, order: usize) -> f64 {
    match order {
        1 => v,
        2 => {
            if v > 0.0 {
                v.sqrt()
            } else if v < 0.0 {
                -(-v).sqrt()
            } else {
                0.0
            }
        }
        3 => {
            if v == 0.0 {
                0.0
            } else {
                v.cbrt()
            }
        }
        l => {
            if v > 0.0 {
                v.powf(1.0 / l as f64)
            } else if v < 0.0 {
                -(-v).powf(1.0 / l as f64)
            } else {
                0.0
            }
        }
    }
}

pub fn rescale_into(x: &[f64], order: usize, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o = rescale_value(v, order);
    }
}

/// Geometric rescaling of a whole input vector for an order-`l` term.
pub fn rescale_features(x: &[f64], order: usize) -> Vec<f64> {
    assert!(order >= 1, "order must be >= 1");
    x.iter().map(|&v| rescale_value(v, order)).collect()
}

#[inline]
pub(crate) fn int_pow(p: f64, order: usize) -> f64 {
    match order {
        1 => p,
        2 => p * p,
        3 => p * p * p,
        l => p.powi(l as i32),
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scratch buffers for one evaluation; reused across rows.
#[derive(Debug, Clone)]
pub struct HeadBuffers {
    /// Rescaled (or feature-net) inputs per higher order, index `l - 2`.
    pub inputs: Vec<Vec<f64>>,
    /// Projections `<u_{l,i}, z_l>` per higher order.
    pub proj: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl HeadBuffers {
    pub fn new(params: &SpamParams) -> Self {
        let d = params.num_features;
        Self {
            inputs: params.rank_spec.ranks().iter().map(|_| vec![0.0; d]).collect(),
            proj: params.rank_spec.ranks().iter().map(|&r| vec![0.0; r]).collect(),
            logits: vec![0.0; params.num_classes],
        }
    }

    pub fn fill_rescaled(&mut self, x: &[f64]) {
        for (idx, buf) in self.inputs.iter_mut().enumerate() {
            rescale_into(x, idx + 2, buf);
        }
    }
}

/// Evaluates the polynomial head given the order-1 input `z1` and the
/// per-order inputs already stored in `buf.inputs`. Singular values are
/// taken from `singular` (which may be a dropout-masked copy).
pub(crate) fn head_logits(
    params: &SpamParams,
    singular: &[Vec<f64>],
    z1: &[f64],
    buf: &mut HeadBuffers,
) {
    let d = params.num_features;
    let c_count = params.num_classes;
    for c in 0..c_count {
        buf.logits[c] = params.bias[c] + dot(&params.order1[c * d..(c + 1) * d], z1);
    }
    for (order, r) in params.rank_spec.higher_orders() {
        let idx = order - 2;
        let basis = &params.bases[idx];
        let z = &buf.inputs[idx];
        let proj = &mut buf.proj[idx];
        for i in 0..r {
            proj[i] = dot(&basis[i * d..(i + 1) * d], z);
        }
        let lam = &singular[idx];
        for c in 0..c_count {
            let lam_c = &lam[c * r..(c + 1) * r];
            let mut acc = 0.0;
            for i in 0..r {
                acc += lam_c[i] * int_pow(proj[i], order);
            }
            buf.logits[c] += acc;
        }
    }
}

/// All class logits for one input.
pub fn poly_forward_multiclass(params: &SpamParams, x: &[f64]) -> Result<Vec<f64>> {
    params.check_input(x)?;
    let mut buf = HeadBuffers::new(params);
    buf.fill_rescaled(x);
    head_logits(params, &params.singular, x, &mut buf);
    Ok(buf.logits)
}

/// Single-output model value (`C = 1`).
pub fn poly_forward(params: &SpamParams, x: &[f64]) -> Result<f64> {
    if params.num_classes != 1 {
        return Err(SpamError::Shape(format!(
            "poly_forward needs a single-output model, got {} classes",
            params.num_classes
        )));
    }
    Ok(poly_forward_multiclass(params, x)?[0])
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

fn predict_rows(params: &SpamParams, rows: &[f64], out: &mut Vec<f64>) {
    let d = params.num_features;
    let mut buf = HeadBuffers::new(params);
    for x in rows.chunks(d.max(1)) {
        buf.fill_rescaled(x);
        head_logits(params, &params.singular, x, &mut buf);
        out.extend_from_slice(&buf.logits);
    }
}

fn check_batch(params: &SpamParams, x: &Matrix) -> Result<()> {
    if x.cols() != params.num_features {
        return Err(SpamError::Shape(format!(
            "batch has {} features, model expects {}",
            x.cols(),
            params.num_features
        )));
    }
    Ok(())
}

/// Logits for every row (`n x C`), evaluated over row chunks in parallel
/// when the `parallel` feature is on.
pub fn predict_batch(params: &SpamParams, x: &Matrix) -> Result<Matrix> {
    check_batch(params, x)?;
    let d = params.num_features.max(1);
    let parts = par::map_chunks(x.as_slice(), d * par::CHUNK_ROWS, |_, rows| {
        let mut out = Vec::with_capacity(rows.len() / d * params.num_classes);
        predict_rows(params, rows, &mut out);
        out
    });
    Matrix::from_vec(x.rows(), params.num_classes, parts.concat())
}

/// Sequential reference for [`predict_batch`].
pub fn predict_batch_seq(params: &SpamParams, x: &Matrix) -> Result<Matrix> {
    check_batch(params, x)?;
    let mut out = Vec::with_capacity(x.rows() * params.num_classes);
    predict_rows(params, x.as_slice(), &mut out);
    Matrix::from_vec(x.rows(), params.num_classes, out)
}
