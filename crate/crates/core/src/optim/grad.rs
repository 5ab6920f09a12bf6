//! Reverse-mode gradients of the mean loss over a set of rows.
//!
//! Rows are processed in fixed chunks of [`par::CHUNK_ROWS`]; each chunk
//! accumulates into its own buffer and the buffers are summed in chunk
//! order, so the result does not depend on how chunks are scheduled.

use super::loss::{sample_loss_grad, LossKind};
use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::model::SpamModel;
use crate::neural::BankTrace;
use crate::par;
use crate::poly::forward::{head_logits, int_pow, HeadBuffers};
use crate::poly::params::ParamBlocks;

/// Gradient buffer (same layout as the model) plus the mean loss.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub grad: SpamModel,
    pub loss: f64,
}

struct Workspace {
    buf: HeadBuffers,
    z1: Vec<f64>,
    dlogits: Vec<f64>,
    dz: Vec<Vec<f64>>,
    trace: BankTrace,
}

impl Workspace {
    fn new(model: &SpamModel) -> Self {
        let width = model.params.num_features;
        let orders = if model.nets.is_some() { model.degree() } else { 0 };
        Self {
            buf: HeadBuffers::new(&model.params),
            z1: vec![0.0; width],
            dlogits: vec![0.0; model.num_outputs()],
            dz: vec![vec![0.0; width]; orders],
            trace: BankTrace::default(),
        }
    }
}

/// Forward and backward pass for one row; returns the unscaled loss.
#[allow(clippy::too_many_arguments)]
fn accumulate_row(
    model: &SpamModel,
    singular: &[Vec<f64>],
    mask: Option<&[Vec<f64>]>,
    kind: LossKind,
    x: &[f64],
    y: f64,
    scale: f64,
    ws: &mut Workspace,
    grad: &mut SpamModel,
) -> Result<f64> {
    let p = &model.params;
    let d = p.num_features;
    let c_count = p.num_classes;

    match &model.nets {
        None => {
            ws.buf.fill_rescaled(x);
            ws.z1.copy_from_slice(x);
        }
        Some(bank) => {
            bank.trace(x, &mut ws.trace);
            ws.z1.copy_from_slice(bank.outputs_for(&ws.trace, 1));
            for (idx, input) in ws.buf.inputs.iter_mut().enumerate() {
                input.copy_from_slice(bank.outputs_for(&ws.trace, idx + 2));
            }
        }
    }
    head_logits(p, singular, &ws.z1, &mut ws.buf);
    let loss = sample_loss_grad(kind, &ws.buf.logits, y, scale, &mut ws.dlogits)?;

    let g = &mut grad.params;
    let neural = model.nets.is_some();
    if neural {
        for dz in ws.dz.iter_mut() {
            dz.fill(0.0);
        }
    }
    for c in 0..c_count {
        let gc = ws.dlogits[c];
        g.bias[c] += gc;
        let row = c * d..(c + 1) * d;
        for (gw, &z) in g.order1[row.clone()].iter_mut().zip(&ws.z1) {
            *gw += gc * z;
        }
        if neural {
            for (dz, &w) in ws.dz[0].iter_mut().zip(&p.order1[row]) {
                *dz += gc * w;
            }
        }
    }
    for (order, r) in p.rank_spec.higher_orders() {
        let idx = order - 2;
        let proj = &ws.buf.proj[idx];
        let z = &ws.buf.inputs[idx];
        let lam = &singular[idx];
        let basis = &p.bases[idx];
        let of = order as f64;
        for i in 0..r {
            let pi = proj[i];
            let pow_l = int_pow(pi, order);
            let pow_lm1 = int_pow(pi, order - 1);
            let mut dp = 0.0;
            for c in 0..c_count {
                let gc = ws.dlogits[c];
                let k = c * r + i;
                let m = mask.map_or(1.0, |m| m[idx][k]);
                g.singular[idx][k] += gc * pow_l * m;
                dp += gc * lam[k];
            }
            dp *= of * pow_lm1;
            if dp == 0.0 {
                continue;
            }
            let u = &basis[i * d..(i + 1) * d];
            for (gu, &zj) in g.bases[idx][i * d..(i + 1) * d].iter_mut().zip(z) {
                *gu += dp * zj;
            }
            if neural {
                for (dz, &uj) in ws.dz[order - 1].iter_mut().zip(u) {
                    *dz += dp * uj;
                }
            }
        }
    }
    if let (Some(bank), Some(gbank)) = (&model.nets, grad.nets.as_mut()) {
        for order in 1..=model.degree() {
            bank.backward(&ws.trace, order, &ws.dz[order - 1], gbank);
        }
    }
    Ok(loss)
}

fn check_inputs(model: &SpamModel, x: &Matrix, y: &[f64], rows: &[usize], kind: LossKind) -> Result<()> {
    kind.check_outputs(model.num_outputs())?;
    if x.cols() != model.input_dim() {
        return Err(SpamError::Shape(format!(
            "data has {} features, model expects {}",
            x.cols(),
            model.input_dim()
        )));
    }
    if x.rows() != y.len() {
        return Err(SpamError::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if rows.is_empty() {
        return Err(SpamError::Shape("empty batch".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
        return Err(SpamError::Shape(format!("row {bad} out of range")));
    }
    Ok(())
}

fn chunk_gradient(
    model: &SpamModel,
    singular: &[Vec<f64>],
    mask: Option<&[Vec<f64>]>,
    kind: LossKind,
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    scale: f64,
) -> Result<(SpamModel, f64)> {
    let mut grad = model.clone();
    grad.fill_zero();
    let mut ws = Workspace::new(model);
    let mut loss = 0.0;
    for &r in rows {
        loss += accumulate_row(model, singular, mask, kind, x.row(r), y[r], scale, &mut ws, &mut grad)?;
    }
    Ok((grad, loss))
}

fn reduce(model: &SpamModel, parts: Vec<Result<(SpamModel, f64)>>, n: usize) -> Result<BatchGradient> {
    let mut grad = model.clone();
    grad.fill_zero();
    let mut loss = 0.0;
    for part in parts {
        let (g, l) = part?;
        grad.add_assign_blocks(&g);
        loss += l;
    }
    Ok(BatchGradient {
        grad,
        loss: loss / n as f64,
    })
}

/// Mean loss over `rows` and its gradient. `mask` holds optional dropout
/// multipliers for the singular values.
pub fn batch_gradient(
    model: &SpamModel,
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    kind: LossKind,
    mask: Option<&[Vec<f64>]>,
) -> Result<BatchGradient> {
    check_inputs(model, x, y, rows, kind)?;
    let singular = effective_singular(model, mask);
    let scale = 1.0 / rows.len() as f64;
    let parts = par::map_chunks(rows, par::CHUNK_ROWS, |_, chunk| {
        chunk_gradient(model, &singular, mask, kind, x, y, chunk, scale)
    });
    reduce(model, parts, rows.len())
}

/// Sequential reference for [`batch_gradient`]; bitwise identical result.
pub fn batch_gradient_seq(
    model: &SpamModel,
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    kind: LossKind,
    mask: Option<&[Vec<f64>]>,
) -> Result<BatchGradient> {
    check_inputs(model, x, y, rows, kind)?;
    let singular = effective_singular(model, mask);
    let scale = 1.0 / rows.len() as f64;
    let parts = par::map_chunks_seq(rows, par::CHUNK_ROWS, |_, chunk| {
        chunk_gradient(model, &singular, mask, kind, x, y, chunk, scale)
    });
    reduce(model, parts, rows.len())
}

fn effective_singular(model: &SpamModel, mask: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
    match mask {
        None => model.params.singular.clone(),
        Some(m) => model
            .params
            .singular
            .iter()
            .zip(m)
            .map(|(lam, s)| lam.iter().zip(s).map(|(a, b)| a * b).collect())
            .collect(),
    }
}
