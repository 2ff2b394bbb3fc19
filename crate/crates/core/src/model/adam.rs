use super::config::AdamConfig;
use super::network::Model;
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl Adam {
    /// Fresh state for parameter tensors of the given lengths.
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Adam {
            config,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_model(config: AdamConfig, model: &Model) -> Self {
        let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        Adam::new(config, &sizes)
    }

    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Shape("parameter and moment shapes differ".into()));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_model(&mut self, model: &mut Model, grads: &Model) -> Result<()> {
        let grads = grads.tensors();
        let mut params = model.tensors_mut();
        self.update(&mut params, &grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = Adam::new(AdamConfig::default(), &[3]);
        adam.m[0] = vec![0.5, -0.5, 0.1];
        let mut p = vec![1.0, 2.0, 3.0];
        adam.update(&mut [&mut p], &[&[0.0; 3]]).unwrap();
        // m decays but stays non-zero, so parameters move only via old momentum
        assert_eq!(adam.m[0], vec![0.45, -0.45, 0.09000000000000001]);
        assert_eq!(adam.step, 1);

        let mut fresh = Adam::new(AdamConfig::default(), &[3]);
        let mut q = vec![1.0, 2.0, 3.0];
        fresh.update(&mut [&mut q], &[&[0.0; 3]]).unwrap();
        assert_eq!(q, vec![1.0, 2.0, 3.0]);
        assert_eq!(fresh.m[0], vec![0.0; 3]);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        let g = [0.3, -2.0, 1e-6, 0.0];
        let mut p = vec![0.0; 4];
        let mut adam = Adam::new(cfg, &[4]);
        adam.update(&mut [&mut p], &[&g]).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -cfg.learning_rate * gi / (gi.abs() + cfg.eps);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut adam = Adam::new(AdamConfig::default(), &[2]);
            let mut p = vec![1.0, -1.0];
            for k in 0..5 {
                let g = [0.1 * k as f64, -0.3];
                adam.update(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = Adam::new(AdamConfig::default(), &[2]);
        let mut p = vec![0.0; 3];
        assert!(adam.update(&mut [&mut p], &[&[0.0; 3]]).is_err());
    }
}
