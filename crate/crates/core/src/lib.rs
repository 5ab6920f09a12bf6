//! Polynomial additive models with low-rank interactions.
//!
//! A model is a sum of a linear term and low-rank symmetric tensors of
//! increasing order, evaluated on geometrically rescaled features (or on the
//! outputs of small per-feature networks). Every pairwise term of an order-2
//! model can be read back as an exact contribution to the logit.

pub mod data;
pub mod error;
pub mod matrix;
pub mod model;
pub mod neural;
pub mod optim;
pub mod par;
pub mod poly;
pub mod recipe;
pub mod search;
pub mod verify;

pub use error::{Result, SpamError};
pub use matrix::Matrix;
pub use poly::{ParamBlocks, RankSpec, SpamParams};
