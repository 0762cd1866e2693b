//! Adaptive-moment optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::tensor::{Parameter, Tensor};
use super::NnError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seed used by the model builder for parameter initialization.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidConfig {
                context: "OptimizerConfig",
            })
        }
    }
}

/// Adam state over a fixed list of parameter shapes. Parameters must be passed
/// to `step` in the same order on every call.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: OptimizerConfig,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step_count: u64,
}

impl Adam {
    pub fn new(cfg: OptimizerConfig, shapes: &[Vec<usize>]) -> Result<Self, NnError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            first_moment: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second_moment: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update from the gradients currently stored in `params`.
    pub fn step(&mut self, params: &mut [&mut Parameter]) -> Result<(), NnError> {
        if params.len() != self.first_moment.len() {
            return Err(NnError::ShapeMismatch {
                context: "Adam::step",
                expected: vec![self.first_moment.len()],
                found: vec![params.len()],
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.cfg.beta1.powi(t);
        let bias2 = 1.0 - self.cfg.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let m = self.first_moment[i].values_mut();
            let v = self.second_moment[i].values_mut();
            let grads = p.grad.values();
            debug_assert_eq!(m.len(), grads.len());
            for (j, &g) in grads.iter().enumerate() {
                m[j] = self.cfg.beta1 * m[j] + (1.0 - self.cfg.beta1) * g;
                v[j] = self.cfg.beta2 * v[j] + (1.0 - self.cfg.beta2) * g * g;
            }
            let values = p.value.values_mut();
            for j in 0..values.len() {
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                values[j] -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        Ok(())
    }
}
