use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Moment estimates for Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamWState {
    pub config: AdamWConfig,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamWState {
    pub fn new(store: &ParamStore, config: AdamWConfig) -> Self {
        let first_moment: Vec<Vec<f64>> = store
            .iter()
            .map(|(_, p)| vec![0.0; p.value.len()])
            .collect();
        AdamWState {
            config,
            step_count: 0,
            second_moment: first_moment.clone(),
            first_moment,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One in-place update of every parameter in `store` from its `grad` buffer.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<()> {
        if store.len() != self.first_moment.len() {
            return Err(Error::ShapeMismatch {
                op: "adamw_step",
                lhs: vec![store.len()],
                rhs: vec![self.first_moment.len()],
            });
        }
        for (p, m) in store.params_mut().iter().zip(&self.first_moment) {
            if p.value.len() != m.len() || p.grad.len() != m.len() {
                return Err(Error::ShapeMismatch {
                    op: "adamw_step",
                    lhs: p.value.shape().to_vec(),
                    rhs: vec![m.len()],
                });
            }
        }
        self.step_count += 1;
        let AdamWConfig {
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - libm::pow(beta1, t as f64);
        let bc2 = 1.0 - libm::pow(beta2, t as f64);
        for ((p, m), v) in store
            .params_mut()
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let decay = if p.decay {
                1.0 - lr * weight_decay
            } else {
                1.0
            };
            let values = p.value.data_mut();
            for i in 0..values.len() {
                let g = p.grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] = values[i] * decay - lr * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn single(value: f64, grad: f64) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::scalar(value), true);
        s.get_mut(id).grad[0] = grad;
        s
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut s = single(0.37, 0.0);
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut st = AdamWState::new(&s, cfg);
        for _ in 0..5 {
            st.step(&mut s, 0.1).unwrap();
        }
        assert_eq!(s.scalar(0), 0.37);
        assert_eq!(st.step_count(), 5);
    }

    #[test]
    fn decay_is_decoupled() {
        let mut s = single(1.0, 0.0);
        let mut st = AdamWState::new(&s, AdamWConfig::default());
        st.step(&mut s, 0.1).unwrap();
        assert!((s.scalar(0) - 0.999).abs() < 1e-15);
    }

    #[test]
    fn first_step_hand_computation() {
        let mut s = single(0.0, 1.0);
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut st = AdamWState::new(&s, cfg);
        st.step(&mut s, 1e-3).unwrap();
        // m_hat = v_hat = 1, so the step is -lr / (1 + eps)
        let exact = -1e-3 / (1.0 + 1e-8);
        assert!((s.scalar(0) - exact).abs() < 1e-18);
        assert!((s.scalar(0) - -9.99999995e-4).abs() < 1e-11);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let s = single(0.0, 1.0);
        let mut st = AdamWState::new(&s, AdamWConfig::default());
        let mut other = single(0.0, 1.0);
        other.add("extra", Tensor::scalar(1.0), true);
        assert!(st.step(&mut other, 1e-3).is_err());
    }
}
