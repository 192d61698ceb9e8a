use crate::diffnum::{ParamStore, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for every parameter in a store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, p)| Tensor::zeros(p.value().rows(), p.value().cols()))
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update from the accumulated gradients, which are
/// then cleared.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let correct1 = 1.0 - BETA1.powi(t);
    let correct2 = 1.0 - BETA2.powi(t);
    for (id, param) in store.iter_mut() {
        let (m, v) = (&mut state.first[id.0], &mut state.second[id.0]);
        let (value, grad) = param.value_and_grad_mut();
        let entries = value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((theta, &g), (m, v)) in entries {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *theta -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    store.zero_grads();
}
