use rand::Rng;

use super::rank::RankSpec;
use crate::error::{Result, SpamError};

/// Anything that can be viewed as an ordered list of flat parameter blocks.
///
/// The block order is stable; optimizer state and gradient buffers are
/// matched to parameters by position.
pub trait ParamBlocks {
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn fill_zero(&mut self) {
        for b in self.blocks_mut() {
            b.fill(0.0);
        }
    }

    /// `self += other`, block by block.
    fn add_assign_blocks(&mut self, other: &Self) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
    }

    /// Flat copy in block order.
    fn to_flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    fn get_flat(&self, mut idx: usize) -> f64 {
        for b in self.blocks() {
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("flat parameter index out of range");
    }

    fn set_flat(&mut self, mut idx: usize, value: f64) {
        for b in self.blocks_mut() {
            if idx < b.len() {
                b[idx] = value;
                return;
            }
            idx -= b.len();
        }
        panic!("flat parameter index out of range");
    }
}

/// Full state of a polynomial additive model.
///
/// Layout (all row-major):
/// * `bias`: `C`
/// * `order1`: `C x d`
/// * `bases[l - 2]`: `r_l x d`, shared across classes
/// * `singular[l - 2]`: `C x r_l`, class specific
#[derive(Debug, Clone, PartialEq)]
pub struct SpamParams {
    pub num_features: usize,
    pub num_classes: usize,
    pub rank_spec: RankSpec,
    pub bias: Vec<f64>,
    pub order1: Vec<f64>,
    pub bases: Vec<Vec<f64>>,
    pub singular: Vec<Vec<f64>>,
}

impl SpamParams {
    pub fn zeros(num_features: usize, num_classes: usize, rank_spec: RankSpec) -> Self {
        assert!(num_classes >= 1, "at least one output is required");
        let d = num_features;
        let c = num_classes;
        let bases = rank_spec.ranks().iter().map(|&r| vec![0.0; r * d]).collect();
        let singular = rank_spec.ranks().iter().map(|&r| vec![0.0; c * r]).collect();
        Self {
            num_features: d,
            num_classes: c,
            rank_spec,
            bias: vec![0.0; c],
            order1: vec![0.0; c * d],
            bases,
            singular,
        }
    }

    /// Random initialization: order-1 weights and bases uniform in
    /// `+-1/sqrt(d)`, singular values uniform in `+-1/sqrt(r_l)`, zero bias.
    pub fn random<R: Rng + ?Sized>(
        num_features: usize,
        num_classes: usize,
        rank_spec: RankSpec,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(num_features, num_classes, rank_spec);
        let a = 1.0 / (num_features.max(1) as f64).sqrt();
        for w in p.order1.iter_mut() {
            *w = rng.gen_range(-a..a);
        }
        for basis in p.bases.iter_mut() {
            for w in basis.iter_mut() {
                *w = rng.gen_range(-a..a);
            }
        }
        for (lam, &r) in p.singular.iter_mut().zip(p.rank_spec.ranks()) {
            let s = 1.0 / (r as f64).sqrt();
            for w in lam.iter_mut() {
                *w = rng.gen_range(-s..s);
            }
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.rank_spec.degree()
    }

    /// Basis vector `i` of order `l` (`l >= 2`).
    pub fn basis(&self, order: usize, i: usize) -> &[f64] {
        let d = self.num_features;
        &self.bases[order - 2][i * d..(i + 1) * d]
    }

    /// Singular values of order `l` for one class.
    pub fn singular_row(&self, order: usize, class: usize) -> &[f64] {
        let r = self.rank_spec.rank(order);
        &self.singular[order - 2][class * r..(class + 1) * r]
    }

    pub fn order1_row(&self, class: usize) -> &[f64] {
        let d = self.num_features;
        &self.order1[class * d..(class + 1) * d]
    }

    /// Checks that every buffer matches `(d, C, rank_spec)`.
    pub fn validate(&self) -> Result<()> {
        let d = self.num_features;
        let c = self.num_classes;
        let bad = |what: &str, want: usize, got: usize| {
            Err(SpamError::Shape(format!("{what}: expected {want}, got {got}")))
        };
        if c == 0 {
            return Err(SpamError::Shape("num_classes must be >= 1".into()));
        }
        if self.bias.len() != c {
            return bad("bias", c, self.bias.len());
        }
        if self.order1.len() != c * d {
            return bad("order1", c * d, self.order1.len());
        }
        let k = self.rank_spec.degree();
        if self.bases.len() != k - 1 || self.singular.len() != k - 1 {
            return Err(SpamError::Shape(format!(
                "degree {k} needs {} basis/singular blocks",
                k - 1
            )));
        }
        for (order, r) in self.rank_spec.higher_orders() {
            let b = &self.bases[order - 2];
            if b.len() != r * d {
                return bad(&format!("bases[{order}]"), r * d, b.len());
            }
            let s = &self.singular[order - 2];
            if s.len() != c * r {
                return bad(&format!("singular[{order}]"), c * r, s.len());
            }
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(SpamError::Shape(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.num_features
            )));
        }
        Ok(())
    }

    /// Keeps only one class (used to build single-logit views for oracles).
    pub fn class_slice(&self, class: usize) -> Result<SpamParams> {
        if class >= self.num_classes {
            return Err(SpamError::LabelOutOfRange {
                label: class,
                classes: self.num_classes,
            });
        }
        let mut p = SpamParams::zeros(self.num_features, 1, self.rank_spec.clone());
        p.bias[0] = self.bias[class];
        p.order1.copy_from_slice(self.order1_row(class));
        p.bases = self.bases.clone();
        for (order, _) in self.rank_spec.higher_orders() {
            p.singular[order - 2].copy_from_slice(self.singular_row(order, class));
        }
        Ok(p)
    }
}

impl ParamBlocks for SpamParams {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.bias, &self.order1];
        out.extend(self.bases.iter().map(|b| b.as_slice()));
        out.extend(self.singular.iter().map(|s| s.as_slice()));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.bias, &mut self.order1];
        out.extend(self.bases.iter_mut().map(|b| b.as_mut_slice()));
        out.extend(self.singular.iter_mut().map(|s| s.as_mut_slice()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_follow_spec() {
        let spec = RankSpec::new(3, vec![4, 2]).unwrap();
        let p = SpamParams::zeros(5, 3, spec);
        p.validate().unwrap();
        assert_eq!(p.num_params(), 3 + 15 + 20 + 10 + 12 + 6);
        assert_eq!(p.basis(3, 1).len(), 5);
        assert_eq!(p.singular_row(2, 2).len(), 4);
    }

    #[test]
    fn flat_access_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = RankSpec::new(2, vec![3]).unwrap();
        let mut p = SpamParams::random(4, 2, spec, &mut rng);
        let flat = p.to_flat();
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(p.get_flat(i), *v);
        }
        p.set_flat(7, 42.0);
        assert_eq!(p.to_flat()[7], 42.0);
    }

    #[test]
    fn validate_catches_bad_buffers() {
        let spec = RankSpec::new(2, vec![3]).unwrap();
        let mut p = SpamParams::zeros(4, 1, spec);
        p.bases[0].pop();
        assert!(matches!(p.validate(), Err(SpamError::Shape(_))));
    }

    #[test]
    fn class_slice_copies_class_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = RankSpec::new(2, vec![3]).unwrap();
        let p = SpamParams::random(4, 3, spec, &mut rng);
        let s = p.class_slice(2).unwrap();
        assert_eq!(s.order1, p.order1_row(2));
        assert_eq!(s.singular[0], p.singular_row(2, 2));
        assert!(p.class_slice(3).is_err());
    }
}
