use rand::Rng;

use crate::poly::params::SpamParams;

/// `sum |u|` over every basis of order >= 2.
pub fn l1_basis_penalty(params: &SpamParams) -> f64 {
    params.bases.iter().flatten().map(|u| u.abs()).sum()
}

/// Adds `beta * sign(u)` to the basis gradients.
pub(crate) fn add_l1_subgradient(params: &SpamParams, beta: f64, grad: &mut SpamParams) {
    for (g, u) in grad.bases.iter_mut().zip(&params.bases) {
        for (gi, &ui) in g.iter_mut().zip(u) {
            if ui > 0.0 {
                *gi += beta;
            } else if ui < 0.0 {
                *gi -= beta;
            }
        }
    }
}

/// Per-entry multipliers for the singular values: 0 for dropped entries,
/// `1 / (1 - p)` for kept ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub scale: Vec<Vec<f64>>,
}

impl DropoutMask {
    pub fn sample<R: Rng + ?Sized>(params: &SpamParams, p: f64, rng: &mut R) -> Self {
        let keep = 1.0 / (1.0 - p);
        let scale = params
            .singular
            .iter()
            .map(|lam| {
                lam.iter()
                    .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                    .collect()
            })
            .collect();
        Self { scale }
    }

    pub fn apply(&self, singular: &[Vec<f64>]) -> Vec<Vec<f64>> {
        singular
            .iter()
            .zip(&self.scale)
            .map(|(lam, s)| lam.iter().zip(s).map(|(a, b)| a * b).collect())
            .collect()
    }
}

/// Inverted dropout on one block of singular values. Identity when not
/// training or when `p == 0`.
pub fn lambda_dropout<R: Rng + ?Sized>(values: &[f64], p: f64, rng: &mut R, training: bool) -> Vec<f64> {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if !training || p == 0.0 {
        return values.to_vec();
    }
    let keep = 1.0 / (1.0 - p);
    values
        .iter()
        .map(|&v| if rng.gen::<f64>() < p { 0.0 } else { v * keep })
        .collect()
}

/// Cosine annealing from `lr0` at `t = 0` to `eta_min` at `t = horizon`.
pub fn cosine_lr(t: usize, horizon: usize, lr0: f64, eta_min: f64) -> f64 {
    let h = horizon.max(1) as f64;
    let frac = (t as f64 / h).min(1.0);
    eta_min + 0.5 * (lr0 - eta_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}
