use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut s, &mut p, &[0.0; 3], &AdamConfig::default());
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_is_sign_like() {
        let cfg = AdamConfig::default();
        for g in [1e-6, 0.3, -7.0, 1e5] {
            let mut s = AdamState::new(1);
            let mut p = vec![0.0];
            adam_step(&mut s, &mut p, &[g], &cfg);
            // m_hat = g, v_hat = g^2 after bias correction
            let expect = -cfg.learning_rate * g / (g.abs() + cfg.epsilon);
            assert!((p[0] - expect).abs() < 1e-15);
            assert!(p[0].abs() <= cfg.learning_rate * (1.0 + 1e-12));
        }
    }

    #[test]
    fn deterministic_on_copied_state() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(2);
        let mut p = vec![0.1, 0.2];
        adam_step(&mut s, &mut p, &[0.5, -0.5], &cfg);
        let (mut s1, mut s2) = (s.clone(), s.clone());
        let (mut p1, mut p2) = (p.clone(), p.clone());
        adam_step(&mut s1, &mut p1, &[0.3, 0.1], &cfg);
        adam_step(&mut s2, &mut p2, &[0.3, 0.1], &cfg);
        assert_eq!((s1, p1), (s2, p2));
    }
}
