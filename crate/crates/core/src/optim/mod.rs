//! Training: losses, regularizers, AdamW, gradients and the epoch loop.

pub mod adamw;
pub mod grad;
pub mod gradcheck;
pub mod loss;
pub mod regularize;
pub mod train;

pub use adamw::{AdamConfig, AdamW};
pub use grad::{batch_gradient, batch_gradient_seq, BatchGradient};
pub use gradcheck::{grad_check, grad_check_fraction, GRAD_CHECK_STEP};
pub use loss::{loss, LossKind};
pub use regularize::{cosine_lr, l1_basis_penalty, lambda_dropout, DropoutMask};
pub use train::{train, Checkpoint, EpochRecord, TrainConfig, TrainOutcome};
