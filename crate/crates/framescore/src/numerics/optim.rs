//! Bias-corrected Adam over a [`ParamStore`].

use super::autodiff::ParamStore;
use super::tensor::Tensor2;

/// First/second-moment accumulators plus hyperparameters. Moment tensors are
/// aligned with the store the state was created from.
pub struct AdamState {
    first_moment: Vec<Tensor2>,
    second_moment: Vec<Tensor2>,
    step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        AdamState::with_hyperparameters(store, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(
        store: &ParamStore,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        let zeros: Vec<Tensor2> = store
            .iter()
            .map(|p| Tensor2::zeros(p.value.rows(), p.value.cols()))
            .collect();
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One in-place update from the gradients currently held by the store.
    /// Gradients are left untouched.
    pub fn step(&mut self, store: &mut ParamStore) {
        assert_eq!(
            self.first_moment.len(),
            store.len(),
            "optimizer state does not match parameter store"
        );
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);

        for ((param, m), v) in store
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            debug_assert_eq!(param.value.shape(), m.shape());
            for ((x, g), (mv, vv)) in param
                .value
                .data_mut()
                .iter_mut()
                .zip(param.grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut()))
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * g;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * g * g;
                let m_hat = *mv / bias1;
                let v_hat = *vv / bias2;
                *x -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}
