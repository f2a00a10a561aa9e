//! Bias-corrected Adam over the flat parameter buffer.

use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(learning_rate: f64, params: &ParamSet) -> Self {
        AdamState {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
        }
    }

    /// One update step. Rejects non-finite gradients, naming the offending
    /// parameter tensor.
    pub fn update(&mut self, params: &mut ParamSet, grads: &Grads) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "optimizer/parameter shape mismatch");
        if let Some(bad) = grads.data().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                param: params.name_of_flat_index(bad).to_owned(),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let data = params.data_mut();
        for i in 0..data.len() {
            let g = grads.data()[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
