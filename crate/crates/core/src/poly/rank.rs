use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};

/// Polynomial degree plus the rank of every order-`l` tensor, `l >= 2`.
/// The order-1 term always has rank 1 and is not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSpec {
    degree: usize,
    ranks: Vec<usize>,
}

impl RankSpec {
    pub fn new(degree: usize, ranks: Vec<usize>) -> Result<Self> {
        if degree == 0 {
            return Err(SpamError::InvalidRankSpec("degree must be >= 1".into()));
        }
        if ranks.len() != degree - 1 {
            return Err(SpamError::InvalidRankSpec(format!(
                "degree {degree} needs {} higher-order ranks, got {}",
                degree - 1,
                ranks.len()
            )));
        }
        if let Some(pos) = ranks.iter().position(|&r| r == 0) {
            return Err(SpamError::InvalidRankSpec(format!(
                "rank of order {} is zero",
                pos + 2
            )));
        }
        Ok(Self { degree, ranks })
    }

    /// Degree-1 (linear) spec.
    pub fn linear() -> Self {
        Self {
            degree: 1,
            ranks: Vec::new(),
        }
    }

    /// Builds a spec from the full rank vector `[1, r2, .., rk]`.
    pub fn from_full(full: &[usize]) -> Result<Self> {
        match full.split_first() {
            Some((1, rest)) => Self::new(full.len(), rest.to_vec()),
            Some((r1, _)) => Err(SpamError::InvalidRankSpec(format!(
                "order-1 rank must be 1, got {r1}"
            ))),
            None => Err(SpamError::InvalidRankSpec("empty rank vector".into())),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Ranks `[r2, .., rk]`.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Rank of order `l` (`l >= 2`).
    pub fn rank(&self, order: usize) -> usize {
        self.ranks[order - 2]
    }

    /// `1 + sum(r_l)`.
    pub fn cumulative_rank(&self) -> usize {
        1 + self.higher_rank_sum()
    }

    pub fn higher_rank_sum(&self) -> usize {
        self.ranks.iter().sum()
    }

    /// Higher orders `2..=k` paired with their rank.
    pub fn higher_orders(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ranks.iter().enumerate().map(|(i, &r)| (i + 2, r))
    }
}
