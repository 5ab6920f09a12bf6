use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};
use crate::poly::params::ParamBlocks;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with decoupled weight decay. Moments are stored flat, in the block
/// order of the parameter container.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update: `theta -= lr * wd * theta`, then the bias-corrected
    /// adaptive step, then (convex mode) `theta = max(theta, 0)`.
    pub fn step<P: ParamBlocks>(
        &mut self,
        params: &mut P,
        grads: &P,
        lr: f64,
        weight_decay: f64,
        convex: bool,
    ) -> Result<()> {
        let grad_blocks = grads.blocks();
        let total: usize = grad_blocks.iter().map(|b| b.len()).sum();
        if total != self.m.len() {
            return Err(SpamError::Shape(format!(
                "optimizer holds {} moments, gradient has {total} entries",
                self.m.len()
            )));
        }
        let mut offset = 0;
        for (b, block) in grad_blocks.iter().enumerate() {
            if let Some(pos) = block.iter().position(|g| !g.is_finite()) {
                return Err(SpamError::NonFinite(format!(
                    "gradient block {b} entry {pos} is {} (flat index {}, step {})",
                    block[pos],
                    offset + pos,
                    self.t + 1
                )));
            }
            offset += block.len();
        }

        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let decay = 1.0 - lr * weight_decay;
        let mut k = 0;
        for (theta_block, g_block) in params.blocks_mut().into_iter().zip(grad_blocks) {
            for (theta, &g) in theta_block.iter_mut().zip(g_block) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta *= decay;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
                if convex && *theta < 0.0 {
                    *theta = 0.0;
                }
                k += 1;
            }
        }
        Ok(())
    }
}
