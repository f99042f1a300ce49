//! Adam with decoupled weight decay.

use super::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// Plain Adam.
    pub fn adam(learning_rate: f64) -> Self {
        Self::new(learning_rate, 0.0)
    }

    /// One update. Decay multiplies the parameters by `1 - lr·λ` before the
    /// moment step and never enters the moments.
    pub fn step(&self, params: &mut [f64], grads: &[f64], state: &mut AdamWState) {
        assert_eq!(
            params.len(),
            grads.len(),
            "parameter/gradient length mismatch"
        );
        assert_eq!(
            params.len(),
            state.m.len(),
            "optimizer state sized for other params"
        );
        state.t += 1;
        let t = state.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.learning_rate * self.weight_decay;
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        {
            *p *= decay;
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamWState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// AdamW step using the learning rate and weight decay of `cfg`.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamWState, cfg: &TrainConfig) {
    AdamW::new(cfg.learning_rate, cfg.weight_decay).step(params, grads, state);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let mut p = vec![1.5, -2.0];
        let mut s = AdamWState::new(2);
        AdamW::new(1e-3, 0.0).step(&mut p, &[0.0, 0.0], &mut s);
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn zero_grad_with_decay_shrinks() {
        let mut p = vec![1.5, -2.0];
        let mut s = AdamWState::new(2);
        AdamW::new(1e-2, 0.1).step(&mut p, &[0.0, 0.0], &mut s);
        assert_eq!(p, vec![1.5 * (1.0 - 1e-3), -2.0 * (1.0 - 1e-3)]);
    }
}
