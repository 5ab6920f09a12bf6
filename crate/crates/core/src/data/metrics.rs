use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::model::Task;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SpamError::Shape(format!("{a} predictions for {b} targets")));
    }
    if a == 0 {
        return Err(SpamError::UndefinedMetric("no rows to score".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), target.len())?;
    let sse: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// share their average rank. Labels must be 0 or 1.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SpamError::UndefinedMetric("NaN score".into()));
    }
    let mut n_pos = 0usize;
    for &y in labels {
        if y == 1.0 {
            n_pos += 1;
        } else if y != 0.0 {
            return Err(SpamError::UndefinedMetric(format!("label {y} is not 0 or 1")));
        }
    }
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SpamError::UndefinedMetric(
            "AUROC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based: start+1 ..= end)
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            if labels[i] == 1.0 {
                pos_rank_sum += avg;
            }
        }
        start = end;
    }
    let np = n_pos as f64;
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// Fraction of rows whose highest logit is the label; ties go to the
/// lowest class index.
pub fn accuracy_top1(logits: &Matrix, labels: &[f64]) -> Result<f64> {
    check_lengths(logits.rows(), labels.len())?;
    let c = logits.cols();
    let mut hits = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        if y < 0.0 || y.fract() != 0.0 || y as usize >= c {
            return Err(SpamError::LabelOutOfRange {
                label: y.max(0.0) as usize,
                classes: c,
            });
        }
        let row = logits.row(i);
        let mut best = 0;
        for k in 1..c {
            if row[k] > row[best] {
                best = k;
            }
        }
        if best == y as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse,
    Auroc,
    Accuracy,
}

impl Metric {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => Metric::Rmse,
            Task::Binary => Metric::Auroc,
            Task::Multiclass => Metric::Accuracy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Auroc => "auroc",
            Metric::Accuracy => "accuracy",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Rmse)
    }

    /// `true` if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }
}

/// Task metric of an `n x C` logit matrix. Binary tasks are scored on the
/// raw logit, which orders rows exactly like its sigmoid.
pub fn evaluate(task: Task, logits: &Matrix, targets: &[f64]) -> Result<f64> {
    match task {
        Task::Regression => rmse(&logits.column(0), targets),
        Task::Binary => auroc(&logits.column(0), targets),
        Task::Multiclass => accuracy_top1(logits, targets),
    }
}

/// Metrics document written by the command line tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub metric_name: String,
    pub value: f64,
    pub n_test: usize,
    pub seed: u64,
    pub split: String,
}
