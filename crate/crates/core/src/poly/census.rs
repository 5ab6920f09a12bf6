use serde::{Deserialize, Serialize};

use super::explain::interaction_matrix;
use super::params::SpamParams;
use super::rank::RankSpec;
use crate::error::Result;

/// Absolute threshold below which a pairwise coefficient counts as zero.
pub const DEFAULT_INTERACTION_TAU: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionCensus {
    /// Active unordered pairs `(i, j)` with `i < j`.
    pub pairs: Vec<(usize, usize)>,
    pub total_pairs: usize,
    pub fraction: f64,
}

/// Unordered feature pairs whose aggregated pairwise coefficient exceeds
/// `tau` in magnitude.
pub fn active_interactions(
    params: &SpamParams,
    class_index: usize,
    tau: f64,
) -> Result<InteractionCensus> {
    let m = interaction_matrix(params, class_index)?;
    let d = params.num_features;
    let mut pairs = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            if m[i * d + j].abs() > tau {
                pairs.push((i, j));
            }
        }
    }
    let total_pairs = d * d.saturating_sub(1) / 2;
    let fraction = if total_pairs == 0 {
        0.0
    } else {
        pairs.len() as f64 / total_pairs as f64
    };
    Ok(InteractionCensus {
        pairs,
        total_pairs,
        fraction,
    })
}

/// Number of trainable values. With `shared` bases the higher-order
/// directions are stored once for all classes; otherwise each class owns
/// its own bases.
pub fn param_count(d: usize, num_classes: usize, rank_spec: &RankSpec, shared: bool) -> usize {
    let c = num_classes;
    let r = rank_spec.higher_rank_sum();
    if shared {
        c * (1 + d) + c * r + d * r
    } else {
        c * (1 + d + r * (d + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::params::ParamBlocks;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_bases_have_no_interactions() {
        let p = SpamParams::zeros(4, 1, RankSpec::new(2, vec![3]).unwrap());
        let c = active_interactions(&p, 0, DEFAULT_INTERACTION_TAU).unwrap();
        assert_eq!(c.fraction, 0.0);
        assert_eq!(c.total_pairs, 6);
    }

    #[test]
    fn single_pair() {
        let mut p = SpamParams::zeros(2, 1, RankSpec::new(2, vec![1]).unwrap());
        p.bases[0] = vec![1.0, 0.5];
        p.singular[0] = vec![1.0];
        let c = active_interactions(&p, 0, 1e-6).unwrap();
        assert_eq!(c.pairs, vec![(0, 1)]);
        assert_eq!(c.fraction, 1.0);
    }

    #[test]
    fn rank_one_support_count() {
        // m nonzero entries -> m(m-1)/2 active pairs
        for m in 0..=6 {
            let mut p = SpamParams::zeros(8, 1, RankSpec::new(2, vec![1]).unwrap());
            for i in 0..m {
                p.bases[0][i] = 0.5 + i as f64;
            }
            p.singular[0] = vec![1.5];
            let c = active_interactions(&p, 0, 1e-6).unwrap();
            assert_eq!(c.pairs.len(), m * m.saturating_sub(1) / 2);
        }
    }

    #[test]
    fn monotone_in_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = SpamParams::random(7, 2, RankSpec::new(2, vec![3]).unwrap(), &mut rng);
        let mut last = usize::MAX;
        for tau in [0.0, 1e-3, 1e-2, 0.05, 0.1, 0.3, 1.0] {
            let n = active_interactions(&p, 1, tau).unwrap().pairs.len();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn counts() {
        let spec = RankSpec::new(2, vec![100]).unwrap();
        assert_eq!(param_count(54, 7, &spec, true), 6485);
        assert_eq!(param_count(2, 3, &RankSpec::linear(), true), 9);
        assert_eq!(param_count(2, 3, &RankSpec::linear(), false), 9);
        assert_eq!(param_count(5, 1, &spec, true), param_count(5, 1, &spec, false));
    }

    #[test]
    fn shared_never_exceeds_unshared() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let d = rng.gen_range(1..40);
            let c = rng.gen_range(1..10);
            let k = rng.gen_range(1..4);
            let ranks = (1..k).map(|_| rng.gen_range(1..50)).collect();
            let spec = RankSpec::new(k, ranks).unwrap();
            let s = param_count(d, c, &spec, true);
            let u = param_count(d, c, &spec, false);
            assert!(s <= u);
            assert_eq!(s == u, c == 1 || k == 1);
            let p = SpamParams::zeros(d, c, spec);
            assert_eq!(p.num_params(), s);
        }
    }
}
