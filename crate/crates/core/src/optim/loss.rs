use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::model::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Mse,
    BinaryLogistic,
    SoftmaxCrossEntropy,
}

impl LossKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => LossKind::Mse,
            Task::Binary => LossKind::BinaryLogistic,
            Task::Multiclass => LossKind::SoftmaxCrossEntropy,
        }
    }

    pub fn check_outputs(self, outputs: usize) -> Result<()> {
        let ok = match self {
            LossKind::Mse | LossKind::BinaryLogistic => outputs == 1,
            LossKind::SoftmaxCrossEntropy => outputs >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(SpamError::Shape(format!(
                "{self:?} loss cannot be used with {outputs} outputs"
            )))
        }
    }
}

/// `ln(1 + exp(m))` without overflow.
fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

fn class_label(y: f64, classes: usize) -> Result<usize> {
    if y < 0.0 || y.fract() != 0.0 || y as usize >= classes {
        return Err(SpamError::LabelOutOfRange {
            label: y.max(0.0) as usize,
            classes,
        });
    }
    Ok(y as usize)
}

/// Loss of one sample; writes `scale * dloss/dlogits` into `grad`.
pub(crate) fn sample_loss_grad(
    kind: LossKind,
    logits: &[f64],
    target: f64,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    match kind {
        LossKind::Mse => {
            let r = logits[0] - target;
            grad[0] = 2.0 * r * scale;
            Ok(r * r)
        }
        LossKind::BinaryLogistic => {
            let t = match class_label(target, 2)? {
                1 => 1.0,
                _ => -1.0,
            };
            let m = -t * logits[0];
            grad[0] = -t * sigmoid(m) * scale;
            Ok(softplus(m))
        }
        LossKind::SoftmaxCrossEntropy => {
            let y = class_label(target, logits.len())?;
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (g, &z) in grad.iter_mut().zip(logits) {
                *g = (z - max).exp();
                sum += *g;
            }
            for g in grad.iter_mut() {
                *g = *g / sum * scale;
            }
            grad[y] -= scale;
            Ok(max + sum.ln() - logits[y])
        }
    }
}

/// Mean loss over the rows of an `n x C` logit matrix.
pub fn loss(kind: LossKind, logits: &Matrix, targets: &[f64]) -> Result<f64> {
    kind.check_outputs(logits.cols())?;
    if logits.rows() != targets.len() || targets.is_empty() {
        return Err(SpamError::Shape(format!(
            "{} logit rows for {} targets",
            logits.rows(),
            targets.len()
        )));
    }
    let mut scratch = vec![0.0; logits.cols()];
    let mut total = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        total += sample_loss_grad(kind, logits.row(i), y, 0.0, &mut scratch)?;
    }
    Ok(total / targets.len() as f64)
}
