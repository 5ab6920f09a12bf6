//! Small generated datasets for smoke runs and training checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::load::RawTable;
use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::model::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// `y = 3 sqrt(x0 x1) + 0.5`, two features.
    SqrtProduct,
    /// `y = w.x + 0.25` with `w_i = (-1)^i (i + 1) / d`.
    Linear,
    /// Uniform random targets, for memorization checks.
    Noise,
    /// Binary label `(x0 > 0.5) xor (x1 > 0.5)`.
    Xor,
    /// Three classes from thresholds on `x0 + x1`.
    Bands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_d() -> usize {
    2
}

pub fn linear_weights(d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * (i + 1) as f64 / d as f64
        })
        .collect()
}

pub const LINEAR_BIAS: f64 = 0.25;

pub fn generate(spec: &SyntheticSpec) -> Result<RawTable> {
    let d = match spec.kind {
        SyntheticKind::SqrtProduct => 2,
        _ => spec.d,
    };
    if d < 2 && matches!(spec.kind, SyntheticKind::Xor | SyntheticKind::Bands) {
        return Err(SpamError::Config(format!("{:?} needs d >= 2", spec.kind)));
    }
    if d == 0 {
        return Err(SpamError::Config("synthetic data needs d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(spec.n * d);
    let mut targets = Vec::with_capacity(spec.n);
    let w = linear_weights(d);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y = match spec.kind {
            SyntheticKind::SqrtProduct => 3.0 * (x[0] * x[1]).sqrt() + 0.5,
            SyntheticKind::Linear => w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + LINEAR_BIAS,
            SyntheticKind::Noise => rng.gen_range(0.0..1.0),
            SyntheticKind::Xor => ((x[0] > 0.5) ^ (x[1] > 0.5)) as u8 as f64,
            SyntheticKind::Bands => {
                let s = x[0] + x[1];
                if s < 0.8 {
                    0.0
                } else if s < 1.2 {
                    1.0
                } else {
                    2.0
                }
            }
        };
        data.extend_from_slice(&x);
        targets.push(y);
    }
    let (task, num_classes) = match spec.kind {
        SyntheticKind::Xor => (Task::Binary, 2),
        SyntheticKind::Bands => (Task::Multiclass, 3),
        _ => (Task::Regression, 1),
    };
    Ok(RawTable {
        features: Matrix::from_vec(spec.n, d, data)?,
        targets,
        feature_names: (0..d).map(|i| format!("x{i}")).collect(),
        task,
        num_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_shapes_and_values() {
        let t = generate(&SyntheticSpec {
            kind: SyntheticKind::SqrtProduct,
            n: 50,
            d: 7,
            seed: 1,
        })
        .unwrap();
        assert_eq!(t.features.cols(), 2);
        for i in 0..50 {
            let x = t.features.row(i);
            assert_eq!(t.targets[i], 3.0 * (x[0] * x[1]).sqrt() + 0.5);
        }
        let t = generate(&SyntheticSpec {
            kind: SyntheticKind::Bands,
            n: 300,
            d: 3,
            seed: 2,
        })
        .unwrap();
        assert_eq!(t.num_classes, 3);
        for c in 0..3 {
            assert!(t.targets.contains(&(c as f64)));
        }
    }
}
