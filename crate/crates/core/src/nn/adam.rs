use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Adam with bias-corrected moments. Moment buffers are created lazily on
/// the first step and follow the store's parameter order.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients and zeroes them.
    ///
    /// Fails without touching anything if a gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        for p in store.iter() {
            if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}[{i}]", p.name)));
            }
        }
        if self.m.is_empty() {
            self.m = store.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != store.len() {
            return Err(Error::contract("optimizer state does not match parameter store"));
        }

        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);

        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                p.grad[i] = 0.0;
            }
            if let Some(i) = p.value.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("parameter {}[{i}] after update", p.name)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(value: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", &[1], vec![value]).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = scalar_store(1.5);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut s).unwrap();
        assert_eq!(s.by_name("x").unwrap().value[0], 1.5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = scalar_store(0.0);
        s.by_name_mut("x").unwrap().grad[0] = 1.0;
        let mut adam = Adam::new(AdamConfig::with_lr(0.01));
        adam.step(&mut s).unwrap();
        // m_hat = 1, v_hat = 1 → step = lr / (1 + eps)
        let moved = -s.by_name("x").unwrap().value[0];
        assert!((moved - 0.01).abs() < 1e-6);
        assert_eq!(s.by_name("x").unwrap().grad[0], 0.0);
    }

    #[test]
    fn constant_gradient_moves_monotonically_against_sign() {
        let mut s = scalar_store(0.0);
        let mut adam = Adam::new(AdamConfig::with_lr(0.05));
        let mut prev = 0.0;
        for _ in 0..200 {
            s.by_name_mut("x").unwrap().grad[0] = -0.3;
            adam.step(&mut s).unwrap();
            let x = s.by_name("x").unwrap().value[0];
            assert!(x > prev);
            prev = x;
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = scalar_store(0.0);
        s.by_name_mut("x").unwrap().grad[0] = f64::NAN;
        let err = Adam::new(AdamConfig::default()).step(&mut s).unwrap_err();
        assert!(err.to_string().contains("x[0]"), "{err}");
        assert_eq!(s.by_name("x").unwrap().value[0], 0.0);
    }
}
