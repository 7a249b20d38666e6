use serde::{Deserialize, Serialize};

use super::{Param, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid Adam configuration {self:?}"
            )))
        }
    }
}

/// One bias-corrected Adam update. The gradient is left in place.
pub fn adam_step<F: Scalar>(param: &mut Param<F>, config: &AdamConfig) {
    param.step_count += 1;
    let t = param.step_count as i32;
    let b1 = config.beta1;
    let b2 = config.beta2;
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.epsilon;

    let grad = param.grad.data();
    let m = param.adam_m.data_mut();
    let v = param.adam_v.data_mut();
    let theta = param.value.data_mut();
    for i in 0..grad.len() {
        let g = grad[i].to_f64_lossy();
        let mi = b1 * m[i].to_f64_lossy() + (1.0 - b1) * g;
        let vi = b2 * v[i].to_f64_lossy() + (1.0 - b2) * g * g;
        m[i] = F::from_f64_lossy(mi);
        v[i] = F::from_f64_lossy(vi);
        let m_hat = mi / correction1;
        let v_hat = vi / correction2;
        let update = lr * m_hat / (v_hat.sqrt() + eps);
        theta[i] = F::from_f64_lossy(theta[i].to_f64_lossy() - update);
    }
}
