//! Dense expansion of a low-rank model into full symmetric tensors.
//!
//! This is the brute-force reference for the low-rank forward pass: every
//! order-`l` tensor `W_l = sum_i lambda_i u_i^{(x) l}` is materialized
//! cell by cell and contracted naively against the rescaled input.

use super::forward::rescale_features;
use super::params::SpamParams;
use crate::error::{Result, SpamError};

/// Default cap on `d^k` cells for [`expand_full`].
pub const DEFAULT_ORACLE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedPolynomial {
    pub num_features: usize,
    pub bias: f64,
    /// `tensors[l - 1]` holds the order-`l` tensor, `d^l` cells in
    /// row-major (first index slowest) order. Order 1 is the weight vector.
    pub tensors: Vec<Vec<f64>>,
}

impl ExpandedPolynomial {
    pub fn degree(&self) -> usize {
        self.tensors.len()
    }

    /// Cell of the order-`l` tensor at a multi-index.
    pub fn cell(&self, idx: &[usize]) -> f64 {
        self.tensors[idx.len() - 1][flat_index(idx, self.num_features)]
    }
}

fn flat_index(idx: &[usize], d: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * d + i)
}

/// Steps a multi-index through `[0, d)^l` in row-major order.
fn advance(idx: &mut [usize], d: usize) -> bool {
    for pos in (0..idx.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < d {
            return true;
        }
        idx[pos] = 0;
    }
    false
}

pub fn expand_full(params: &SpamParams) -> Result<ExpandedPolynomial> {
    expand_full_with_cap(params, DEFAULT_ORACLE_CAP)
}

pub fn expand_full_with_cap(params: &SpamParams, cap: u128) -> Result<ExpandedPolynomial> {
    params.validate()?;
    if params.num_classes != 1 {
        return Err(SpamError::Shape(format!(
            "dense expansion needs a single-output model, got {} classes \
             (take a class slice first)",
            params.num_classes
        )));
    }
    let d = params.num_features;
    let k = params.degree();
    let cells = (d as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if cells > cap {
        return Err(SpamError::OracleCap { cells, cap });
    }

    let mut tensors = vec![params.order1.clone()];
    for (order, r) in params.rank_spec.higher_orders() {
        let mut w = vec![0.0; d.pow(order as u32)];
        let lam = params.singular_row(order, 0);
        if d > 0 {
            let mut idx = vec![0usize; order];
            let mut sorted = vec![0usize; order];
            loop {
                // Products are taken over the sorted multi-index so every
                // permutation of a cell gets bit-identical arithmetic.
                sorted.copy_from_slice(&idx);
                sorted.sort_unstable();
                let mut acc = 0.0;
                for i in 0..r {
                    let u = params.basis(order, i);
                    let mut prod = lam[i];
                    for &j in &sorted {
                        prod *= u[j];
                    }
                    acc += prod;
                }
                w[flat_index(&idx, d)] = acc;
                if !advance(&mut idx, d) {
                    break;
                }
            }
        }
        tensors.push(w);
    }
    Ok(ExpandedPolynomial {
        num_features: d,
        bias: params.bias[0],
        tensors,
    })
}

/// `bias + sum_l W_l contracted l times against x~_l`, by plain enumeration.
pub fn eval_expanded(poly: &ExpandedPolynomial, x: &[f64]) -> Result<f64> {
    let d = poly.num_features;
    if x.len() != d {
        return Err(SpamError::Shape(format!(
            "input has {} features, expansion expects {d}",
            x.len()
        )));
    }
    let mut total = poly.bias;
    for (pos, w) in poly.tensors.iter().enumerate() {
        let order = pos + 1;
        if w.len() != d.pow(order as u32) {
            return Err(SpamError::Shape(format!(
                "order-{order} tensor has {} cells, expected {}",
                w.len(),
                d.pow(order as u32)
            )));
        }
        if d == 0 {
            continue;
        }
        let xt = rescale_features(x, order);
        let mut idx = vec![0usize; order];
        loop {
            let mut term = w[flat_index(&idx, d)];
            for &j in &idx {
                term *= xt[j];
            }
            total += term;
            if !advance(&mut idx, d) {
                break;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::forward::poly_forward;
    use crate::poly::rank::RankSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scaled_outer_product() {
        let mut p = SpamParams::zeros(2, 1, RankSpec::new(2, vec![1]).unwrap());
        p.bases[0] = vec![1.0, 2.0];
        p.singular[0] = vec![3.0];
        let e = expand_full(&p).unwrap();
        assert_eq!(e.tensors[1], vec![3.0, 6.0, 6.0, 12.0]);
    }

    #[test]
    fn sum_of_two_outer_products() {
        // direct summation oracle: W = l1 u1 u1^T + l2 u2 u2^T
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = SpamParams::random(3, 1, RankSpec::new(2, vec![2]).unwrap(), &mut rng);
        let e = expand_full(&p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut want = 0.0;
                for r in 0..2 {
                    want += p.singular[0][r] * p.basis(2, r)[i] * p.basis(2, r)[j];
                }
                assert!((e.cell(&[i, j]) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_permutation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = SpamParams::random(4, 1, RankSpec::new(3, vec![3, 3]).unwrap(), &mut rng);
        let e = expand_full(&p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(e.cell(&[i, j]), e.cell(&[j, i]));
                for k in 0..4 {
                    let v = e.cell(&[i, j, k]);
                    for perm in [[i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
                        assert_eq!(v, e.cell(&perm));
                    }
                }
            }
        }
    }

    #[test]
    fn dense_path_hand_example() {
        let mut p = SpamParams::zeros(2, 1, RankSpec::new(2, vec![1]).unwrap());
        p.bases[0] = vec![1.0, 1.0];
        p.singular[0] = vec![2.0];
        let e = expand_full(&p).unwrap();
        assert_eq!(eval_expanded(&e, &[0.25, 0.25]).unwrap(), 2.0);
    }

    #[test]
    fn bias_only_expansion() {
        let e = ExpandedPolynomial {
            num_features: 2,
            bias: 0.7,
            tensors: vec![vec![0.0; 2], vec![0.0; 4]],
        };
        assert_eq!(eval_expanded(&e, &[0.3, 0.9]).unwrap(), 0.7);
    }

    #[test]
    fn matches_low_rank_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = SpamParams::random(5, 1, RankSpec::new(3, vec![3, 2]).unwrap(), &mut rng);
        let e = expand_full(&p).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a = poly_forward(&p, &x).unwrap();
            let b = eval_expanded(&e, &x).unwrap();
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn cap_and_class_checks() {
        let p = SpamParams::zeros(30, 1, RankSpec::new(3, vec![1, 1]).unwrap());
        assert!(matches!(
            expand_full_with_cap(&p, 1000),
            Err(SpamError::OracleCap { cells: 27000, cap: 1000 })
        ));
        let p = SpamParams::zeros(300, 1, RankSpec::new(3, vec![1, 1]).unwrap());
        assert!(matches!(expand_full(&p), Err(SpamError::OracleCap { .. })));
        let p = SpamParams::zeros(3, 2, RankSpec::new(2, vec![1]).unwrap());
        assert!(matches!(expand_full(&p), Err(SpamError::Shape(_))));
    }
}
