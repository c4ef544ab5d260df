use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one group of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub params: Vec<ParamId>,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(store: &ParamStore, params: Vec<ParamId>, config: AdamConfig) -> Self {
        let zeros = |id: &ParamId| Tensor::zeros(store.value(*id).shape());
        Self {
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            params,
            step: 0,
            config,
        }
    }

    /// One bias-corrected Adam update of this group from the gradients
    /// stored in `store`. The group's gradient buffers are zeroed afterwards.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(beta1, f64::from(t));
        let c2 = 1.0 - libm::pow(beta2, f64::from(t));
        for (k, id) in self.params.iter().enumerate() {
            let p = store.get_mut(*id);
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            let grad = p.grad.data_mut();
            for (((x, g), mi), vi) in p.value.data_mut().iter_mut().zip(grad.iter_mut()).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * *g;
                *vi = beta2 * *vi + (1.0 - beta2) * *g * *g;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *x -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                *g = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn store_with(value: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(vec![value, -value]));
        (s, id)
    }

    #[test]
    fn zero_grad_is_identity() {
        let (mut s, id) = store_with(0.7);
        let before = s.clone();
        let mut adam = AdamState::new(&s, vec![id], AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut s, 0.002);
        }
        assert_eq!(s.value(id), before.value(id));
        assert_eq!(adam.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut s, id) = store_with(1.0);
        s.get_mut(id).grad = Tensor::vector(vec![1.0, 1.0]);
        let mut adam = AdamState::new(&s, vec![id], AdamConfig::default());
        adam.step(&mut s, 0.002);
        let expected = 1.0 - 0.002 / (1.0 + 1e-8);
        assert!((s.value(id).data()[0] - expected).abs() < 1e-15);
        assert!((s.value(id).data()[0] - 0.998).abs() < 1e-9);
        assert!(s.get(id).grad.data().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn trajectories_are_bitwise_reproducible() {
        let run = || {
            let (mut s, id) = store_with(0.3);
            let mut adam = AdamState::new(&s, vec![id], AdamConfig::default());
            for i in 0..50 {
                let x = s.value(id).data()[0];
                s.get_mut(id).grad = Tensor::vector(vec![2.0 * x + f64::from(i) * 0.01, 0.5]);
                adam.step(&mut s, 0.002);
            }
            s
        };
        assert_eq!(run(), run());
    }
}
