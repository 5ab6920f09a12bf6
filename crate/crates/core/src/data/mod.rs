//! Dataset ingestion, train-fitted normalization, splitting, minibatching
//! and evaluation metrics.

pub mod load;
pub mod metrics;
pub mod split;
pub mod synthetic;

pub use load::{load_csv, ColumnKind, ColumnSpec, RawTable, Schema};
pub use metrics::{accuracy_top1, auroc, evaluate, rmse, Metric, MetricsReport};
pub use split::{
    minibatches, normalize_minmax, split_70_10_20, DatasetSplit, NormStats, Partition,
    SplitIndices,
};
