//! Adam with a constant-then-exponential learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `lr0` for the first half of training, then exponential decay to
/// `lr0 * decay` at the last iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub total: usize,
    pub lr0: f64,
    /// Ratio between the final and the initial learning rate.
    pub decay: f64,
}

impl LrSchedule {
    pub fn new(total: usize) -> Self {
        Self {
            total,
            lr0: 1e-3,
            decay: 1e-3,
        }
    }

    pub fn lr_at(&self, iter: usize) -> f64 {
        let half = self.total as f64 / 2.0;
        let it = iter as f64;
        if it <= half || half == 0.0 {
            self.lr0
        } else {
            self.lr0 * self.decay.powf((it - half) / half)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len(),
                got: params.len(),
            });
        }
        if grad.len() != params.len() {
            return Err(Error::ShapeMismatch {
                expected: params.len(),
                got: grad.len(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}
