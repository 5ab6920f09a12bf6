use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{AdamConfig, AdamW};
use super::grad::batch_gradient;
use super::loss::LossKind;
use super::regularize::{add_l1_subgradient, cosine_lr, l1_basis_penalty, DropoutMask};
use crate::data::metrics::{evaluate, Metric};
use crate::data::split::{minibatches, DatasetSplit};
use crate::error::{Result, SpamError};
use crate::model::SpamModel;
use crate::poly::params::ParamBlocks;

pub const MAX_BATCH_SIZE: usize = 1024;

/// Which epoch's parameters `train` returns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Checkpoint {
    #[default]
    BestVal,
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub eta_min: f64,
    pub weight_decay: f64,
    /// Scale of the L1 penalty on higher-order bases.
    pub beta_reg: f64,
    pub lambda_dropout_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub convex_mode: bool,
    /// Defaults to the natural loss of the model's task.
    pub loss_kind: Option<LossKind>,
    pub adam: AdamConfig,
    pub checkpoint: Checkpoint,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-2,
            eta_min: 0.0,
            weight_decay: 0.0,
            beta_reg: 0.0,
            lambda_dropout_p: 0.0,
            epochs: 100,
            batch_size: 512,
            seed: 0,
            convex_mode: false,
            loss_kind: None,
            adam: AdamConfig::default(),
            checkpoint: Checkpoint::BestVal,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(SpamError::Config(m));
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return fail(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.eta_min.is_finite() && self.eta_min >= 0.0) {
            return fail(format!("eta_min must be >= 0, got {}", self.eta_min));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return fail(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.beta_reg.is_finite() && self.beta_reg >= 0.0) {
            return fail(format!("beta_reg must be >= 0, got {}", self.beta_reg));
        }
        if !(0.0..1.0).contains(&self.lambda_dropout_p) {
            return fail(format!(
                "lambda_dropout_p must be in [0, 1), got {}",
                self.lambda_dropout_p
            ));
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.batch_size == 0 || self.batch_size > MAX_BATCH_SIZE {
            return fail(format!(
                "batch_size must be in 1..={MAX_BATCH_SIZE}, got {}",
                self.batch_size
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch picked by `cfg.checkpoint`.
    pub model: SpamModel,
    pub history: Vec<EpochRecord>,
    /// Epoch of the returned parameters and its validation metric.
    pub best_epoch: usize,
    pub best_val: f64,
}

/// Minibatch training with AdamW and cosine annealing. Returns the epoch with
/// the best validation metric unless `cfg.checkpoint` asks for the last one.
pub fn train(mut model: SpamModel, data: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.validate()?;
    let kind = cfg
        .loss_kind
        .unwrap_or_else(|| LossKind::for_task(data.task));
    kind.check_outputs(model.num_outputs())?;
    if model.input_dim() != data.num_features() {
        return Err(SpamError::Shape(format!(
            "model expects {} features, data has {}",
            model.input_dim(),
            data.num_features()
        )));
    }
    let n = data.train.rows();
    if n == 0 || data.val.rows() == 0 {
        return Err(SpamError::TooSmall("training needs train and validation rows".into()));
    }
    model.flags.convex = cfg.convex_mode;
    if cfg.convex_mode {
        for block in model.blocks_mut() {
            for v in block.iter_mut() {
                *v = v.max(0.0);
            }
        }
    }

    let metric = Metric::for_task(data.task);
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let horizon = cfg.epochs * batches_per_epoch;
    let mut opt = AdamW::new(model.num_params(), cfg.adam);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(u64::MAX);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, SpamModel)> = None;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut lr = cfg.lr0;
        for (b, rows) in minibatches(n, cfg.batch_size, cfg.seed, epoch as u64)
            .iter()
            .enumerate()
        {
            let mask = (cfg.lambda_dropout_p > 0.0)
                .then(|| DropoutMask::sample(&model.params, cfg.lambda_dropout_p, &mut dropout_rng));
            let mut bg = batch_gradient(
                &model,
                &data.train,
                &data.train_y,
                rows,
                kind,
                mask.as_ref().map(|m| m.scale.as_slice()),
            )?;
            if cfg.beta_reg > 0.0 {
                bg.loss += cfg.beta_reg * l1_basis_penalty(&model.params);
                add_l1_subgradient(&model.params, cfg.beta_reg, &mut bg.grad.params);
            }
            if !bg.loss.is_finite() {
                return Err(SpamError::NonFinite(format!(
                    "loss is {} at epoch {epoch}, batch {b}",
                    bg.loss
                )));
            }
            lr = cosine_lr(step, horizon, cfg.lr0, cfg.eta_min);
            opt.step(&mut model, &bg.grad, lr, cfg.weight_decay, cfg.convex_mode)
                .map_err(|e| match e {
                    SpamError::NonFinite(m) => {
                        SpamError::NonFinite(format!("epoch {epoch}, batch {b}: {m}"))
                    }
                    other => other,
                })?;
            loss_sum += bg.loss * rows.len() as f64;
            step += 1;
        }
        if !model.all_finite() {
            return Err(SpamError::NonFinite(format!(
                "parameters diverged during epoch {epoch}"
            )));
        }
        let val_metric = evaluate(data.task, &model.predict(&data.val)?, &data.val_y)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            val_metric,
            lr,
        });
        let improved = match &best {
            None => true,
            Some(_) if cfg.checkpoint == Checkpoint::Last => true,
            Some((_, v, _)) => metric.better(val_metric, *v) || (v.is_nan() && !val_metric.is_nan()),
        };
        if improved {
            best = Some((epoch, val_metric, model.clone()));
        }
    }
    let (best_epoch, best_val, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val,
    })
}
