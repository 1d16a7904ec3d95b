use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::validation(format!("learning rate must be finite and ≥ 0, got {}", self.lr)));
        }
        if !beta_ok(self.beta1) || !beta_ok(self.beta2) {
            return Err(Error::validation(format!(
                "Adam betas must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::validation(format!("Adam epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(config: AdamConfig, params: &[Vec<S>]) -> Result<Self> {
        config.validate()?;
        let zeros = || params.iter().map(|p| alloc::vec![S::zero(); p.len()]).collect();
        Ok(AdamState { config, step: 0, m: zeros(), v: zeros() })
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update<S: Scalar>(params: &mut [Vec<S>], grads: &[Vec<S>], state: &mut AdamState<S>) -> Result<()> {
    let shapes_match = |a: &[Vec<S>]| {
        a.len() == params.len() && a.iter().zip(params.iter()).all(|(x, p)| x.len() == p.len())
    };
    if !shapes_match(grads) || !shapes_match(&state.m) || !shapes_match(&state.v) {
        return Err(Error::structural("gradient or optimizer state does not match the parameters"));
    }
    let c = state.config;
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - libm::pow(c.beta1, t);
    let bc2 = 1.0 - libm::pow(c.beta2, t);
    let (b1, b2) = (S::from_f64(c.beta1), S::from_f64(c.beta2));
    let (one_b1, one_b2) = (S::from_f64(1.0 - c.beta1), S::from_f64(1.0 - c.beta2));
    let (inv_bc1, inv_bc2) = (S::from_f64(1.0 / bc1), S::from_f64(1.0 / bc2));
    let (lr, eps) = (S::from_f64(c.lr), S::from_f64(c.epsilon));
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + one_b1 * g[i];
            v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
            let m_hat = m[i] * inv_bc1;
            let v_hat = v[i] * inv_bc2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
