use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{Gradients, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, model: &Mlp) -> Self {
        let first: Vec<Vec<f64>> = model.tensors().map(|t| vec![0.0; t.len()]).collect();
        let second = first.clone();
        Self {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Nothing is modified when a gradient entry is not
    /// finite.
    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) -> Result<()> {
        let shapes_match = grads.tensors().count() == self.first.len()
            && grads.tensors().zip(&self.first).all(|(g, m)| g.len() == m.len());
        if !shapes_match {
            return Err(Error::Shape {
                context: "Adam::step",
                expected: (self.first.len(), self.first.iter().map(Vec::len).sum()),
                found: (grads.tensors().count(), grads.tensors().map(<[f64]>::len).sum()),
            });
        }
        if grads.tensors().any(|t| t.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFinite { what: "gradient" });
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as f64;
        let correction1 = 1.0 - libm::pow(beta1, t);
        let correction2 = 1.0 - libm::pow(beta2, t);

        for (((param, grad), m), v) in model
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                param[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}
