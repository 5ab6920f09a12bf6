//! Random hyperparameter search. Each trial draws its settings and its
//! training seed from its own stream of the master seed, so the trial table
//! does not depend on how many trials run at once.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::metrics::{evaluate, Metric};
use crate::data::split::DatasetSplit;
use crate::error::{Result, SpamError};
use crate::model::SpamModel;
use crate::optim::{train, TrainConfig};
use crate::par;
use crate::recipe::ModelConfig;

/// Order-2 ranks searched by default.
pub const DEFAULT_RANKS: [usize; 13] = [
    25, 50, 100, 200, 250, 400, 500, 750, 800, 1000, 1200, 1400, 1600,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sampler {
    /// `exp(U[ln low, ln high])`.
    LogUniform { low: f64, high: f64 },
    /// `U[low, high)`.
    Uniform { low: f64, high: f64 },
    Choice { values: Vec<f64> },
    Fixed { value: f64 },
}

impl Sampler {
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: String| Err(SpamError::Config(format!("search space `{name}`: {m}")));
        match *self {
            Sampler::LogUniform { low, high } => {
                if !(low > 0.0 && low <= high && high.is_finite()) {
                    return bad(format!("log-uniform needs 0 < low <= high, got [{low}, {high}]"));
                }
            }
            Sampler::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return bad(format!("uniform needs low <= high, got [{low}, {high}]"));
                }
            }
            Sampler::Choice { ref values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return bad("choice needs a nonempty set of finite values".into());
                }
            }
            Sampler::Fixed { value } => {
                if !value.is_finite() {
                    return bad(format!("fixed value {value} is not finite"));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Sampler::LogUniform { low, high } => {
                if low == high {
                    return low;
                }
                rng.gen_range(low.ln()..high.ln()).exp().clamp(low, high)
            }
            Sampler::Uniform { low, high } => {
                if low == high {
                    return low;
                }
                rng.gen_range(low..high)
            }
            Sampler::Choice { ref values } => values[rng.gen_range(0..values.len())],
            Sampler::Fixed { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub lr: Sampler,
    pub weight_decay: Sampler,
    pub lambda_dropout: Sampler,
    /// One candidate set per order starting at 2; the sampled rank vector is
    /// drawn from their product. Empty keeps the recipe's ranks.
    pub ranks: Vec<Vec<usize>>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            lr: Sampler::LogUniform {
                low: 1e-7,
                high: 1e2,
            },
            weight_decay: Sampler::LogUniform {
                low: 1e-13,
                high: 1e1,
            },
            lambda_dropout: Sampler::Uniform {
                low: 0.0,
                high: 1.0,
            },
            ranks: vec![DEFAULT_RANKS.to_vec()],
        }
    }
}

impl SearchSpace {
    /// Default space for an order-`degree` model: every higher order draws
    /// from the same rank set.
    pub fn for_degree(degree: usize) -> Self {
        Self {
            ranks: vec![DEFAULT_RANKS.to_vec(); degree.saturating_sub(1)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lr.validate("lr")?;
        self.weight_decay.validate("weight_decay")?;
        self.lambda_dropout.validate("lambda_dropout")?;
        for (l, set) in self.ranks.iter().enumerate() {
            if set.is_empty() || set.contains(&0) {
                return Err(SpamError::Config(format!(
                    "search space: rank set for order {} must be nonempty and positive",
                    l + 2
                )));
            }
        }
        Ok(())
    }

    pub fn sample(&self, master_seed: u64, trial: usize) -> TrialSample {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trial as u64);
        let lr = self.lr.sample(&mut rng);
        let weight_decay = self.weight_decay.sample(&mut rng);
        let lambda_dropout_p = self.lambda_dropout.sample(&mut rng);
        let ranks = self
            .ranks
            .iter()
            .map(|set| set[rng.gen_range(0..set.len())])
            .collect();
        TrialSample {
            lr,
            weight_decay,
            lambda_dropout_p,
            ranks,
            seed: rng.next_u64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSample {
    pub lr: f64,
    pub weight_decay: f64,
    pub lambda_dropout_p: f64,
    pub ranks: Vec<usize>,
    pub seed: u64,
}

impl TrialSample {
    /// The recipe's model and training settings with this trial's draws
    /// substituted in.
    pub fn apply(&self, model: &ModelConfig, train: &TrainConfig) -> (ModelConfig, TrainConfig) {
        let mut model = model.clone();
        if !self.ranks.is_empty() {
            model.ranks = self.ranks.clone();
        }
        let train = TrainConfig {
            lr0: self.lr,
            weight_decay: self.weight_decay,
            lambda_dropout_p: self.lambda_dropout_p,
            seed: self.seed,
            ..train.clone()
        };
        (model, train)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    #[serde(flatten)]
    pub sample: TrialSample,
    pub status: TrialStatus,
    pub val_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
    /// Seconds; varies from run to run, so kept apart from the table.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub metric: Metric,
    pub trials: Vec<TrialRecord>,
    /// Index of the best successful trial by validation metric (ties go to
    /// the lower trial id).
    pub best: Option<usize>,
    pub best_model: Option<SpamModel>,
}

impl SearchReport {
    pub fn best_trial(&self) -> Result<&TrialRecord> {
        self.best.map(|i| &self.trials[i]).ok_or_else(|| {
            SpamError::Search(format!("all {} trials failed", self.trials.len()))
        })
    }
}

fn run_trial(
    trial: usize,
    sample: TrialSample,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &DatasetSplit,
) -> (TrialRecord, Option<SpamModel>) {
    let start = Instant::now();
    let outcome = (|| {
        let (m, t) = sample.apply(model_cfg, train_cfg);
        let model = m.build(data.num_features(), data.task, data.num_classes, t.seed)?;
        let out = train(model, data, &t)?;
        let test = evaluate(data.task, &out.model.predict(&data.test)?, &data.test_y)?;
        if !out.best_val.is_finite() || !test.is_finite() {
            return Err(SpamError::NonFinite(format!(
                "validation {} / test {}",
                out.best_val, test
            )));
        }
        Ok((out, test))
    })();
    let wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((out, test)) => (
            TrialRecord {
                trial,
                sample,
                status: TrialStatus::Ok,
                val_metric: Some(out.best_val),
                test_metric: Some(test),
                best_epoch: Some(out.best_epoch),
                error: None,
                wall_time_s,
            },
            Some(out.model),
        ),
        Err(e) => (
            TrialRecord {
                trial,
                sample,
                status: TrialStatus::Failed,
                val_metric: None,
                test_metric: None,
                best_epoch: None,
                error: Some(format!("{}: {e}", e.kind())),
                wall_time_s,
            },
            None,
        ),
    }
}

/// Trains `n_trials` sampled configurations and picks the best by
/// validation metric. Failed trials are recorded, not fatal.
pub fn run_search(
    space: &SearchSpace,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &DatasetSplit,
    n_trials: usize,
    master_seed: u64,
) -> Result<SearchReport> {
    space.validate()?;
    train_cfg.validate()?;
    model_cfg.rank_spec()?;
    let metric = Metric::for_task(data.task);
    let results = par::map_range(n_trials, |t| {
        run_trial(t, space.sample(master_seed, t), model_cfg, train_cfg, data)
    });
    let mut trials = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, f64)> = None;
    let mut models = Vec::with_capacity(n_trials);
    for (i, (rec, model)) in results.into_iter().enumerate() {
        if let Some(v) = rec.val_metric {
            if best.is_none_or(|(_, b)| metric.better(v, b)) {
                best = Some((i, v));
            }
        }
        trials.push(rec);
        models.push(model);
    }
    let best_model = best.and_then(|(i, _)| models[i].take());
    Ok(SearchReport {
        metric,
        trials,
        best: best.map(|(i, _)| i),
        best_model,
    })
}
