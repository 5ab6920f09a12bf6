//! Exact per-term explanations for order <= 2 models.
//!
//! For a degree-2 model the class logit splits as
//!
//! ```text
//! b + sum_i u1_i x_i
//!   + sum_i  (sum_r lambda_r u_ri^2)        x~_i^2
//!   + sum_{i<j} 2 (sum_r lambda_r u_ri u_rj) x~_i x~_j
//! ```
//!
//! with `x~ = sign(x) sqrt|x|`, so the reported terms add back up to the
//! logit. Each unordered pair is reported once with the two-sided factor.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::forward::{poly_forward_multiclass, rescale_features};
use super::params::SpamParams;
use crate::error::{Result, SpamError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    Unary,
    Diagonal,
    Pairwise,
    NeuralUnary,
    NeuralPairwise,
}

impl TermKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TermKind::Unary => "unary",
            TermKind::Diagonal => "diagonal",
            TermKind::Pairwise => "pairwise",
            TermKind::NeuralUnary => "neural-unary",
            TermKind::NeuralPairwise => "neural-pairwise",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub kind: TermKind,
    pub i: usize,
    /// Second feature for pairwise terms (`i < j`).
    pub j: Option<usize>,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub class_index: usize,
    pub bias: f64,
    /// Sorted by `|contribution|`, largest first.
    pub terms: Vec<Term>,
    pub logit: f64,
}

impl Explanation {
    pub fn reconstructed(&self) -> f64 {
        self.bias + self.terms.iter().map(|t| t.contribution).sum::<f64>()
    }

    /// `|bias + sum(terms) - logit|`.
    pub fn completeness_gap(&self) -> f64 {
        (self.reconstructed() - self.logit).abs()
    }

    pub(crate) fn sort_terms(&mut self) {
        self.terms.sort_by(|a, b| {
            b.contribution
                .abs()
                .partial_cmp(&a.contribution.abs())
                .unwrap_or(Ordering::Equal)
                .then_with(|| (a.kind, a.i, a.j).cmp(&(b.kind, b.i, b.j)))
        });
    }
}

/// Symmetric `d x d` matrix of aggregated pairwise coefficients
/// `sum_r lambda_{2,r,c} u_{2,r,i} u_{2,r,j}` for one class.
pub fn interaction_matrix(params: &SpamParams, class: usize) -> Result<Vec<f64>> {
    if params.degree() < 2 {
        return Err(SpamError::UnsupportedOrder(params.degree()));
    }
    if class >= params.num_classes {
        return Err(SpamError::LabelOutOfRange {
            label: class,
            classes: params.num_classes,
        });
    }
    let d = params.num_features;
    let r = params.rank_spec.rank(2);
    let lam = params.singular_row(2, class);
    let mut m = vec![0.0; d * d];
    for k in 0..r {
        let u = params.basis(2, k);
        for i in 0..d {
            let li = lam[k] * u[i];
            for j in i..d {
                m[i * d + j] += li * u[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            m[i * d + j] = m[j * d + i];
        }
    }
    Ok(m)
}

pub fn explain(params: &SpamParams, x: &[f64], class_index: usize) -> Result<Explanation> {
    params.check_input(x)?;
    let k = params.degree();
    if k > 2 {
        return Err(SpamError::UnsupportedOrder(k));
    }
    if class_index >= params.num_classes {
        return Err(SpamError::LabelOutOfRange {
            label: class_index,
            classes: params.num_classes,
        });
    }
    let d = params.num_features;
    let logit = poly_forward_multiclass(params, x)?[class_index];
    let mut terms = Vec::with_capacity(d + d * (d + 1) / 2);
    for (i, (&w, &xi)) in params.order1_row(class_index).iter().zip(x).enumerate() {
        terms.push(Term {
            kind: TermKind::Unary,
            i,
            j: None,
            contribution: w * xi,
        });
    }
    if k == 2 {
        let m = interaction_matrix(params, class_index)?;
        let xt = rescale_features(x, 2);
        for i in 0..d {
            terms.push(Term {
                kind: TermKind::Diagonal,
                i,
                j: None,
                contribution: m[i * d + i] * xt[i] * xt[i],
            });
            for j in i + 1..d {
                terms.push(Term {
                    kind: TermKind::Pairwise,
                    i,
                    j: Some(j),
                    contribution: 2.0 * m[i * d + j] * xt[i] * xt[j],
                });
            }
        }
    }
    let mut e = Explanation {
        class_index,
        bias: params.bias[class_index],
        terms,
        logit,
    };
    e.sort_terms();
    Ok(e)
}
