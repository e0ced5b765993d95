use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay, applied as `p -= lr * weight_decay * p`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-12,
        }
    }
}

/// Moment estimates for every tensor of a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = || params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected update from the gradient slots of `params`,
    /// then zeroes them. Nothing is modified when a gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, store has {}",
                self.first.len(),
                params.len()
            )));
        }
        for t in params.tensors() {
            if let Some(i) = t.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of {}[{i}] is {}",
                    t.name, t.grad[i]
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for ((t, m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for k in 0..t.data.len() {
                let g = t.grad[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                t.data[k] -= lr * weight_decay * t.data[k];
                t.data[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        params.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(value: f64) -> ParamStore {
        let mut s = ParamStore::new(0);
        s.insert("p", vec![1], vec![value]).unwrap();
        s
    }

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut s = scalar_store(1.5);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new(cfg, &s);
        adam.step(&mut s).unwrap();
        assert_eq!(s.tensors()[0].data[0], 1.5);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = scalar_store(0.0);
        s.tensors_mut()[0].grad[0] = 1.0;
        let cfg = AdamConfig {
            lr: 1e-3,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new(cfg, &s);
        adam.step(&mut s).unwrap();
        assert!((s.tensors()[0].data[0] + 1e-3).abs() < 1e-10);
        assert_eq!(s.tensors()[0].grad[0], 0.0);
    }

    #[test]
    fn convex_quadratic_descends() {
        // L(p) = sum (p - c)^2
        let target = [3.0, -2.0, 2.5];
        let mut s = ParamStore::new(0);
        s.insert("p", vec![3], vec![0.0; 3]).unwrap();
        let mut adam = AdamState::new(
            AdamConfig {
                lr: 0.01,
                ..AdamConfig::default()
            },
            &s,
        );
        let loss = |s: &ParamStore| -> f64 {
            s.tensors()[0]
                .data
                .iter()
                .zip(&target)
                .map(|(p, c)| (p - c).powi(2))
                .sum()
        };
        let mut history = vec![loss(&s)];
        for _ in 0..100 {
            let t = &mut s.tensors_mut()[0];
            for k in 0..3 {
                t.grad[k] = 2.0 * (t.data[k] - target[k]);
            }
            adam.step(&mut s).unwrap();
            history.push(loss(&s));
        }
        for w in history[5..].windows(2) {
            assert!(w[1] < w[0], "{history:?}");
        }
    }

    #[test]
    fn non_finite_gradient_is_reported_by_name() {
        let mut s = scalar_store(1.0);
        s.tensors_mut()[0].grad[0] = f64::NAN;
        let mut adam = AdamState::new(AdamConfig::default(), &s);
        let err = adam.step(&mut s).unwrap_err();
        assert!(err.to_string().contains("p[0]"), "{err}");
        assert_eq!(s.tensors()[0].data[0], 1.0);
    }
}
