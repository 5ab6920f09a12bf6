//! Self-check harness: the low-rank forward pass against the dense tensor
//! expansion, and reverse-mode gradients against central differences, over
//! random small models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::model::{SpamModel, Task};
use crate::optim::{grad_check, LossKind};
use crate::par;
use crate::poly::{eval_expanded, expand_full_with_cap, poly_forward_multiclass, RankSpec, SpamParams};

pub const FORWARD_TOLERANCE: f64 = 1e-9;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub max_d: usize,
    pub max_k: usize,
    pub max_rank: usize,
    pub max_classes: usize,
    pub trials: usize,
    pub seed: u64,
    pub oracle_cap: u128,
    /// Test hook: perturbs one basis entry on the oracle side so the
    /// comparison must fail.
    pub corrupt_contraction: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            max_d: 6,
            max_k: 3,
            max_rank: 4,
            max_classes: 3,
            trials: 200,
            seed: 0,
            oracle_cap: crate::poly::DEFAULT_ORACLE_CAP,
            corrupt_contraction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCase {
    pub trial: usize,
    pub d: usize,
    pub degree: usize,
    pub classes: usize,
    pub ranks: Vec<usize>,
    pub loss: LossKind,
    pub forward_dev: f64,
    pub grad_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub trials: usize,
    pub max_forward_dev: f64,
    pub max_grad_err: f64,
    pub forward_tolerance: f64,
    pub gradient_tolerance: f64,
    pub cases: Vec<VerifyCase>,
}

fn run_case(cfg: &VerifyConfig, trial: usize) -> Result<VerifyCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let d = rng.gen_range(1..=cfg.max_d);
    let degree = rng.gen_range(1..=cfg.max_k);
    let classes = rng.gen_range(1..=cfg.max_classes);
    let ranks: Vec<usize> = (1..degree).map(|_| rng.gen_range(1..=cfg.max_rank)).collect();
    let params = SpamParams::random(d, classes, RankSpec::new(degree, ranks.clone())?, &mut rng);
    let n = 6;
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(0.0..1.0)).collect())?;

    let mut forward_dev: f64 = 0.0;
    for c in 0..classes {
        let mut slice = params.class_slice(c)?;
        if cfg.corrupt_contraction {
            match slice.bases.first_mut() {
                Some(b) => b[0] += 1e-3,
                None => slice.order1[0] += 1e-3,
            }
        }
        let oracle = expand_full_with_cap(&slice, cfg.oracle_cap)?;
        for row in x.iter_rows() {
            let fast = poly_forward_multiclass(&params, row)?[c];
            forward_dev = forward_dev.max((fast - eval_expanded(&oracle, row)?).abs());
        }
    }

    let (task, loss) = match classes {
        1 if trial.is_multiple_of(2) => (Task::Regression, LossKind::Mse),
        1 => (Task::Binary, LossKind::BinaryLogistic),
        _ => (Task::Multiclass, LossKind::SoftmaxCrossEntropy),
    };
    let y: Vec<f64> = (0..n)
        .map(|_| match loss {
            LossKind::Mse => rng.gen_range(-1.0..1.0),
            LossKind::BinaryLogistic => rng.gen_range(0..2) as f64,
            LossKind::SoftmaxCrossEntropy => rng.gen_range(0..classes) as f64,
        })
        .collect();
    let model = SpamModel::linear(params, task);
    let grad_err = grad_check(&model, &x, &y, loss, rng.gen())?;
    Ok(VerifyCase {
        trial,
        d,
        degree,
        classes,
        ranks,
        loss,
        forward_dev,
        grad_err,
    })
}

pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.max_d == 0 || cfg.max_k == 0 || cfg.max_rank == 0 || cfg.max_classes == 0 {
        return Err(SpamError::Config(
            "verify needs max_d, max_k, max_rank and max_classes >= 1".into(),
        ));
    }
    let cells = (cfg.max_d as u128).checked_pow(cfg.max_k as u32);
    if cells.is_none_or(|c| c > cfg.oracle_cap) {
        return Err(SpamError::OracleCap {
            cells: cells.unwrap_or(u128::MAX),
            cap: cfg.oracle_cap,
        });
    }
    let cases = par::map_range(cfg.trials, |t| run_case(cfg, t)).into_iter().collect::<Result<Vec<_>>>()?;
    let max_forward_dev = cases.iter().map(|c| c.forward_dev).fold(0.0, f64::max);
    let max_grad_err = cases.iter().map(|c| c.grad_err).fold(0.0, f64::max);
    Ok(VerifyReport {
        pass: max_forward_dev <= FORWARD_TOLERANCE && max_grad_err <= GRADIENT_TOLERANCE,
        trials: cfg.trials,
        max_forward_dev,
        max_grad_err,
        forward_tolerance: FORWARD_TOLERANCE,
        gradient_tolerance: GRADIENT_TOLERANCE,
        cases,
    })
}
