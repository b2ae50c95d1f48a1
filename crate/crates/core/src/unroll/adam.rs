use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    /// Step size for the network parameters.
    pub lr: f64,
    /// Step size for `λ` (in softplus space) and `λ_s`.
    pub lr_hparams: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            lr_hparams: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr_hparams >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && [self.lr, self.lr_hparams, self.eps]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid optimizer settings: {self:?}"
            )))
        }
    }
}

/// Adam moments for a fixed-length parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// One bias-corrected update of `blocks` (concatenated in order) with
    /// gradients `grads`. Non-finite gradients leave everything unchanged.
    pub fn update(
        &mut self,
        blocks: &mut [&mut [f64]],
        grads: &[&[f64]],
        lr: f64,
        cfg: &AdamConfig,
    ) -> Result<()> {
        let len: usize = blocks.iter().map(|b| b.len()).sum();
        let glen: usize = grads.iter().map(|g| g.len()).sum();
        if len != self.m.len() || glen != len || blocks.len() != grads.len() {
            return Err(Error::invalid(format!(
                "optimizer holds {} moments but got {len} parameters and {glen} gradients",
                self.m.len()
            )));
        }
        if let Some(pos) = grads
            .iter()
            .flat_map(|g| g.iter())
            .position(|g| !g.is_finite())
        {
            return Err(Error::NonFinite {
                stage: "gradient",
                iteration: pos,
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let mut k = 0;
        for (block, grad) in blocks.iter_mut().zip(grads) {
            for (p, &g) in block.iter_mut().zip(grad.iter()) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
                k += 1;
            }
        }
        Ok(())
    }
}

/// `ln(1 + eˣ)`, stable for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
