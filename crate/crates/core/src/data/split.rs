use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::load::RawTable;
use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::model::Task;

/// Per-column train minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn fit(raw: &Matrix, rows: &[usize]) -> Self {
        let d = raw.cols();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for &i in rows {
            for (j, &v) in raw.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self { min, max }
    }

    /// `(x - min) / (max - min)` clipped to `[0, 1]`; constant columns map to 0.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..x.len() {
            let span = self.max[j] - self.min[j];
            out[j] = if span > 0.0 {
                ((x[j] - self.min[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }

    /// Inverse map; constant columns come back as their train value.
    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| self.min[j] + v * (self.max[j] - self.min[j]))
            .collect()
    }
}

/// Normalizes every row of `raw` with statistics fitted on `train_rows`.
pub fn normalize_minmax(raw: &Matrix, train_rows: &[usize]) -> Result<(Matrix, NormStats)> {
    if train_rows.is_empty() {
        return Err(SpamError::TooSmall("normalization needs at least one train row".into()));
    }
    let stats = NormStats::fit(raw, train_rows);
    let mut out = Matrix::zeros(raw.rows(), raw.cols());
    for i in 0..raw.rows() {
        stats.apply(raw.row(i), out.row_mut(i));
    }
    Ok((out, stats))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle into train/val/test with `|val| = n/10`, `|test| = n/5`
/// (floored) and the remainder in train. Each part is returned sorted.
pub fn split_70_10_20(n: usize, seed: u64) -> Result<SplitIndices> {
    if n < 10 {
        return Err(SpamError::TooSmall(format!("{n} rows, a split needs at least 10")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = n / 10;
    let n_test = n / 5;
    let mut val = idx[..n_val].to_vec();
    let mut test = idx[n_val..n_val + n_test].to_vec();
    let mut train = idx[n_val + n_test..].to_vec();
    val.sort_unstable();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices { train, val, test })
}

/// Shuffled index batches for one epoch; the last batch may be short.
pub fn minibatches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "val" | "validation" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            other => Err(SpamError::Config(format!(
                "unknown split `{other}` (train, val or test)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

/// Normalized train/val/test partitions of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Matrix,
    pub train_y: Vec<f64>,
    pub val: Matrix,
    pub val_y: Vec<f64>,
    pub test: Matrix,
    pub test_y: Vec<f64>,
    pub norm: NormStats,
    pub feature_names: Vec<String>,
    pub task: Task,
    pub num_classes: usize,
}

impl DatasetSplit {
    pub fn from_table(table: &RawTable, seed: u64) -> Result<Self> {
        let idx = split_70_10_20(table.features.rows(), seed)?;
        let (normed, norm) = normalize_minmax(&table.features, &idx.train)?;
        let pick = |rows: &[usize]| {
            (
                normed.select_rows(rows),
                rows.iter().map(|&i| table.targets[i]).collect::<Vec<f64>>(),
            )
        };
        let (train, train_y) = pick(&idx.train);
        let (val, val_y) = pick(&idx.val);
        let (test, test_y) = pick(&idx.test);
        Ok(Self {
            train,
            train_y,
            val,
            val_y,
            test,
            test_y,
            norm,
            feature_names: table.feature_names.clone(),
            task: table.task,
            num_classes: table.num_classes,
        })
    }

    pub fn num_features(&self) -> usize {
        self.train.cols()
    }

    pub fn part(&self, p: Partition) -> (&Matrix, &[f64]) {
        match p {
            Partition::Train => (&self.train, &self.train_y),
            Partition::Val => (&self.val, &self.val_y),
            Partition::Test => (&self.test, &self.test_y),
        }
    }
}
