//! Adam with bias-corrected moment estimates.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for one ordered group of parameter matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    /// Moments start at zero, shaped like `params`.
    pub fn new(config: AdamConfig, params: &[&Array2<f64>]) -> Self {
        let zeros = || params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Adam {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every parameter in the group. `params` and `grads` must
    /// match the shapes the optimizer was created with, in order.
    pub fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[&Array2<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Argument(format!(
                "optimizer holds {} parameters, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.dim() != self.m[k].dim() || g.dim() != self.m[k].dim() {
                return Err(Error::Shape(format!(
                    "parameter {k}: expected {:?}, got parameter {:?} and gradient {:?}",
                    self.m[k].dim(),
                    p.dim(),
                    g.dim()
                )));
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            Zip::from(&mut **p)
                .and(*g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Seed;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn first_step_by_hand() {
        let mut p = array![[0.0]];
        let mut adam = Adam::new(AdamConfig::default(), &[&p]);
        adam.step(&mut [&mut p], &[&array![[1.0]]]).unwrap();
        // m̂ = v̂ = 1, so the step is lr / (1 + eps).
        assert!((p[[0, 0]] + 9.99999990e-4).abs() < 1e-15, "{}", p[[0, 0]]);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = array![[1.5, -2.0]];
        let before = p.clone();
        let mut adam = Adam::new(AdamConfig::default(), &[&p]);
        for _ in 0..10 {
            adam.step(&mut [&mut p], &[&array![[0.0, 0.0]]]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 10);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = array![[0.0, 1.0]];
        let mut adam = Adam::new(AdamConfig::default(), &[&p]);
        assert!(adam.step(&mut [&mut p], &[&array![[1.0]]]).is_err());
        assert!(adam.step(&mut [], &[]).is_err());
    }

    #[test]
    fn minimizes_a_quadratic_deterministically() {
        let run = || {
            let mut rng = Seed(5).rng();
            let mut p = Array2::from_shape_simple_fn((3, 3), || rng.random_range(-1.0..1.0));
            let mut adam = Adam::new(AdamConfig::with_lr(0.05), &[&p]);
            for _ in 0..100 {
                let g = p.mapv(|x| 2.0 * x);
                adam.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|x| x.abs() < 0.2));
    }
}
