use serde::{Deserialize, Serialize};

use super::ParameterStore;
use crate::error::{Error, Result};

/// Adam with bias correction and L2 weight decay folded into the gradient
/// before the moment updates (not the decoupled AdamW variant).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Adam {
            lr,
            weight_decay,
            ..Adam::default()
        }
    }

    /// Applies one update to every parameter and zeroes the gradients.
    pub fn step(&self, store: &mut ParameterStore) -> Result<()> {
        if let Some(id) = store.ids().find(|&id| store.get(id).grad().is_none()) {
            return Err(Error::contract(format!(
                "parameter {:?} has no gradient",
                store.name(id)
            )));
        }
        let t = store.advance_step() as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let (param, m, v) = store.moments_mut(id);
            let grad = param.grad().expect("checked above").to_vec();
            let data = param.data_mut();
            for i in 0..data.len() {
                let g = grad[i] + self.weight_decay * data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            param.zero_grad();
        }
        Ok(())
    }
}
