use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
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
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Bias-corrected Adam. Coordinates marked frozen are never touched.
#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
    frozen: Vec<bool>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            frozen: vec![false; n],
        }
    }

    pub fn freeze(&mut self, range: std::ops::Range<usize>) {
        self.frozen[range].iter_mut().for_each(|f| *f = true);
    }

    /// One update. A non-finite gradient leaves parameters and state untouched
    /// and reports the `(epoch, batch)` it came from.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], epoch: usize, batch: usize) -> Result<()> {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        if grads.iter().zip(&self.frozen).any(|(g, &f)| !f && !g.is_finite()) {
            return Err(Error::NonFiniteGradient { epoch, batch });
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            if self.frozen[i] {
                continue;
            }
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0];
        let mut a = Adam::new(AdamConfig::default(), 2);
        a.step(&mut p, &[0.0, 0.0], 0, 0).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![0.0];
        let mut a = Adam::new(AdamConfig::default(), 1);
        a.step(&mut p, &[1.0], 0, 0).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut p = vec![0.0, 0.0];
        let mut a = Adam::new(AdamConfig::default(), 2);
        for _ in 0..100 {
            a.step(&mut p, &[3.0, -0.01], 0, 0).unwrap();
        }
        assert!(p[0] < -0.05 && p[1] > 0.05);
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let mut p = vec![0.0];
        let mut a = Adam::new(AdamConfig::default(), 1);
        match a.step(&mut p, &[f64::NAN], 3, 7) {
            Err(Error::NonFiniteGradient { epoch: 3, batch: 7 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p, vec![0.0]);
    }

    #[test]
    fn frozen_coordinates_stay() {
        let mut p = vec![1.0, 1.0];
        let mut a = Adam::new(AdamConfig::default(), 2);
        a.freeze(0..1);
        a.step(&mut p, &[f64::NAN, 1.0], 0, 0).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1.0);
    }
}
