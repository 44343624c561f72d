//! SGD and Adam updates.

use super::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer state for one model instance. Adam moment accumulators match the
/// model's parameter length; the step counter advances once per update.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first_moment: ParamVector,
    second_moment: ParamVector,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, dim: usize) -> Self {
        OptimizerState {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first_moment: ParamVector::zeros(dim),
            second_moment: ParamVector::zeros(dim),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One optimizer update; returns the new parameters and advances state.
    pub fn step(&mut self, params: &ParamVector, grad: &ParamVector) -> Result<ParamVector> {
        if params.len() != grad.len() || params.len() != self.first_moment.len() {
            return Err(Error::Config(format!(
                "optimizer shape mismatch: params {}, grad {}, state {}",
                params.len(),
                grad.len(),
                self.first_moment.len()
            )));
        }
        self.step_count += 1;
        let mut next = params.clone();
        match self.kind {
            OptimizerKind::Sgd => {
                next.add_scaled(grad, -self.learning_rate);
            }
            OptimizerKind::Adam => {
                let b1 = self.beta1;
                let b2 = self.beta2;
                let bias1 = 1.0 - b1.powi(self.step_count as i32);
                let bias2 = 1.0 - b2.powi(self.step_count as i32);
                let m = self.first_moment.as_mut_slice();
                let v = self.second_moment.as_mut_slice();
                let out = next.as_mut_slice();
                for (i, &g) in grad.iter().enumerate() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g;
                    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    out[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
        Ok(next)
    }
}
