//! Low-rank polynomial models: parameters, forward pass, dense oracle,
//! explanations and spectrum diagnostics.

pub mod census;
pub mod expand;
pub mod explain;
pub mod forward;
pub mod params;
pub mod rank;
pub mod spectral;

pub use census::{active_interactions, param_count, InteractionCensus, DEFAULT_INTERACTION_TAU};
pub use expand::{
    eval_expanded, expand_full, expand_full_with_cap, ExpandedPolynomial, DEFAULT_ORACLE_CAP,
};
pub use explain::{explain, interaction_matrix, Explanation, Term, TermKind};
pub use forward::{
    poly_forward, poly_forward_multiclass, predict_batch, predict_batch_seq, rescale_features,
    rescale_value, softmax,
};
pub use params::{ParamBlocks, SpamParams};
pub use rank::RankSpec;
pub use spectral::{sorted_magnitudes, spectral_fit, SpectralFit};
