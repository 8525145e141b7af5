use serde::{Deserialize, Serialize};

use super::params::ParameterSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.7,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: ParameterSet,
    v: ParameterSet,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParameterSet) -> Self {
        Adam {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn update(&mut self, params: &mut ParameterSet, grads: &ParameterSet) -> Result<()> {
        params.check_same_shapes(grads)?;
        params.check_same_shapes(&self.m)?;
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (name, p) in params.iter_mut() {
            let g = grads.get(name);
            let m = self.m.get_mut(name);
            m.zip_mut_with(g, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
            let v = self.v.get_mut(name);
            v.zip_mut_with(g, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
            let m = self.m.get(name);
            let v = self.v.get(name);
            ndarray::Zip::from(p).and(m).and(v).for_each(|p, &m, &v| {
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one(x: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("w", array![[x]]);
        p
    }

    #[test]
    fn defaults() {
        let c = AdamConfig::default();
        assert_eq!((c.lr, c.beta1, c.beta2, c.eps), (0.001, 0.7, 0.999, 1e-8));
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = ParameterSet::new();
        p.insert("w", array![[0.3, -1.2], [4.0, 0.0]]);
        let before = p.clone();
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let g = p.zeros_like();
        for _ in 0..5 {
            adam.update(&mut p, &g).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = 1, v_hat = 1 after bias correction: delta = lr / (1 + eps)
        let mut p = one(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.update(&mut p, &one(1.0)).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.get("w")[[0, 0]] - expected).abs() < 1e-18);
    }

    #[test]
    fn rejects_non_finite() {
        let mut p = one(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        assert!(matches!(
            adam.update(&mut p, &one(f64::INFINITY)),
            Err(Error::NonFiniteGradient(_))
        ));
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = one(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let mut g = ParameterSet::new();
        g.insert("w", array![[1.0, 2.0]]);
        assert!(matches!(adam.update(&mut p, &g), Err(Error::ShapeMismatch(_))));
    }
}
