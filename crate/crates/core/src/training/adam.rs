use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::GradBuffer;
use crate::network::MLPParams;

/// Adam with bias correction over the leading `m.len()` parameter slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(trainable: usize, lr: f64) -> Self {
        Self { step: 0, m: vec![0.0; trainable], v: vec![0.0; trainable], lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// Applies one update to `theta[..m.len()]`.
    pub fn update(&mut self, theta: &mut [f64], grads: &[f64]) -> Result<(), TrainError> {
        let n = self.m.len();
        if theta.len() < n || grads.len() < n {
            return Err(TrainError::Shape { expected: n, found: theta.len().min(grads.len()) });
        }
        if let Some(index) = grads[..n].iter().position(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient { step: self.step + 1, index });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..n {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// One Adam update of the trainable slots; frozen slopes are never touched.
pub fn adam_step(state: &mut AdamState, params: &mut MLPParams, grads: &GradBuffer) -> Result<(), TrainError> {
    if grads.len() != params.len() {
        return Err(TrainError::Shape { expected: params.len(), found: grads.len() });
    }
    state.update(params.as_mut_slice(), grads.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_the_learning_rate() {
        let mut s = AdamState::new(1, 5e-3);
        let mut theta = [0.3];
        s.update(&mut theta, &[1.0]).unwrap();
        let expected = 0.3 - 5e-3 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-16);
        assert_eq!(s.step, 1);
        let mut s = AdamState::new(1, 5e-3);
        let mut theta = [0.0];
        s.update(&mut theta, &[-250.0]).unwrap();
        assert!((theta[0] - 5e-3).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_only_decays_moments() {
        let mut s = AdamState::new(3, 5e-3);
        let mut theta = [1.0, -2.0, 3.0];
        s.update(&mut theta, &[0.5, 0.0, -0.5]).unwrap();
        let after_one = theta;
        let (m, v) = (s.m.clone(), s.v.clone());
        let mut frozen = [1.0, -2.0, 3.0];
        let mut z = AdamState::new(3, 5e-3);
        for _ in 0..5 {
            z.update(&mut frozen, &[0.0; 3]).unwrap();
        }
        assert_eq!(frozen, [1.0, -2.0, 3.0]);
        s.update(&mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta[1], after_one[1]);
        for i in 0..3 {
            assert_eq!(s.m[i], 0.9 * m[i]);
            assert_eq!(s.v[i], 0.999 * v[i]);
        }
        assert_eq!(s.step, 2);
    }

    #[test]
    fn frozen_tail_is_untouched() {
        let mut s = AdamState::new(2, 1e-2);
        let mut theta = [0.0, 0.0, 7.0];
        s.update(&mut theta, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(theta[2], 7.0);
        assert_eq!(s.m.len(), 2);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut s = AdamState::new(2, 1e-2);
        let mut theta = [0.0; 2];
        let err = s.update(&mut theta, &[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteGradient { step: 1, index: 1 }));
        assert_eq!(theta, [0.0; 2]);
        assert_eq!(s.step, 0);
    }
}
