use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grad::batch_gradient;
use super::loss::{loss, LossKind};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::SpamModel;
use crate::poly::params::ParamBlocks;

/// Central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute terms.
const RELATIVE_FLOOR: f64 = 1e-6;

/// Largest relative disagreement between the reverse-mode gradient of the
/// mean loss and central differences, over a random 5% of the parameters
/// whose difference stencil stays on one piece of every gated unit.
pub fn grad_check(model: &SpamModel, x: &Matrix, y: &[f64], kind: LossKind, seed: u64) -> Result<f64> {
    grad_check_fraction(model, x, y, kind, 0.05, seed)
}

pub fn grad_check_fraction(
    model: &SpamModel,
    x: &Matrix,
    y: &[f64],
    kind: LossKind,
    fraction: f64,
    seed: u64,
) -> Result<f64> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let analytic = batch_gradient(model, x, y, &rows, kind, None)?.grad;
    let total = model.num_params();
    let count = ((total as f64 * fraction).ceil() as usize).clamp(1, total.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pattern = model.activation_pattern(x)?;
    let gated = !pattern.is_empty();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    // visit coordinates in random order, skipping any whose stencil moves a
    // ReLU or ExU unit onto another piece: central differences across a kink
    // do not estimate the derivative
    for idx in sample(&mut rng, total, total).into_iter() {
        if checked == count {
            break;
        }
        let theta = model.get_flat(idx);
        probe.set_flat(idx, theta + GRAD_CHECK_STEP);
        let up = loss(kind, &probe.predict_seq(x)?, y)?;
        let smooth_up = !gated || probe.activation_pattern(x)? == pattern;
        probe.set_flat(idx, theta - GRAD_CHECK_STEP);
        let down = loss(kind, &probe.predict_seq(x)?, y)?;
        let smooth_down = !gated || probe.activation_pattern(x)? == pattern;
        probe.set_flat(idx, theta);
        if !(smooth_up && smooth_down) {
            continue;
        }
        checked += 1;
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let a = analytic.get_flat(idx);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}
