//! Adam optimiser.

use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

use super::tensor::Tensor;

/// Adam hyperparameters; `Default` gives the standard
/// lr=1e-3, β₁=0.9, β₂=0.999, ε=1e-8.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// First/second-moment accumulators mirroring one list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, param_shapes: &[&[usize]]) -> Self {
        AdamState {
            config,
            m: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            step: 0,
        }
    }

    pub fn for_params(config: AdamConfig, params: &[&Tensor<T>]) -> Self {
        let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        AdamState::new(config, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Parameter and gradient lists must be
    /// in the same order as at construction.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[&Tensor<T>]) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "parameter list length changed");
        assert_eq!(grads.len(), self.m.len(), "gradient list length mismatch");
        for g in grads {
            if !g.all_finite() {
                return Err(Error::NonFinite("adam gradient"));
            }
        }

        self.step += 1;
        let b1 = T::from(self.config.beta1).unwrap();
        let b2 = T::from(self.config.beta2).unwrap();
        let eps = T::from(self.config.epsilon).unwrap();
        // lr · sqrt(1 − β₂ᵗ) / (1 − β₁ᵗ) folds the bias correction into the rate
        let corr = self.config.learning_rate * (1.0 - self.config.beta2.powi(self.step as i32)).sqrt()
            / (1.0 - self.config.beta1.powi(self.step as i32));
        let lr_t = T::from(corr).unwrap();

        for ((param, grad), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            assert_eq!(param.shape(), grad.shape(), "parameter/gradient shape mismatch");
            for ((p, &g), (mi, vi)) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                *p = *p - lr_t * *mi / (vi.sqrt() + eps);
            }
        }
        Ok(())
    }
}
