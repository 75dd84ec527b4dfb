//! AdamW with decoupled weight decay.

use alloc::collections::BTreeMap;

use crate::params::{ParamId, ParamSet};
use crate::tensor::Matrix;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

struct Slot {
    m: Matrix,
    v: Matrix,
    step: u64,
}

pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    state: BTreeMap<ParamId, Slot>,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            state: BTreeMap::new(),
        }
    }

    /// Apply one update to each listed parameter from its gradient.
    /// Parameters not listed are untouched and keep their moments.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[(ParamId, Matrix)]) {
        for (id, grad) in grads {
            let value = params.value_mut(*id);
            assert!(
                value.rows == grad.rows && value.cols == grad.cols,
                "gradient shape {}x{} does not match parameter {}x{}",
                grad.rows,
                grad.cols,
                value.rows,
                value.cols
            );
            let slot = self.state.entry(*id).or_insert_with(|| Slot {
                m: Matrix::zeros(grad.rows, grad.cols),
                v: Matrix::zeros(grad.rows, grad.cols),
                step: 0,
            });
            slot.step += 1;
            let bc1 = 1.0 - crate::math::powf(BETA1, slot.step as f64);
            let bc2 = 1.0 - crate::math::powf(BETA2, slot.step as f64);
            for i in 0..value.data.len() {
                let g = grad.data[i];
                value.data[i] -= self.learning_rate * self.weight_decay * value.data[i];
                slot.m.data[i] = BETA1 * slot.m.data[i] + (1.0 - BETA1) * g;
                slot.v.data[i] = BETA2 * slot.v.data[i] + (1.0 - BETA2) * g * g;
                let m_hat = slot.m.data[i] / bc1;
                let v_hat = slot.v.data[i] / bc2;
                value.data[i] -= self.learning_rate * m_hat / (crate::math::sqrt(v_hat) + EPS);
            }
        }
    }
}
