//! Adam optimizer over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::denoiser::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    settings: AdamSettings,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(n_params: usize, settings: AdamSettings) -> Self {
        Self {
            settings,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected update. A zero learning rate leaves `params`
    /// untouched bit for bit.
    pub fn step<S: Scalar>(&mut self, params: &mut [S], grads: &[S], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.steps += 1;
        let AdamSettings { beta1, beta2, epsilon } = self.settings;
        let c1 = 1.0 - beta1.powi(self.steps as i32);
        let c2 = 1.0 - beta2.powi(self.steps as i32);
        for i in 0..params.len() {
            let g = grads[i].f64();
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            if lr != 0.0 {
                let update = lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + epsilon);
                params[i] = S::of(params[i].f64() - update);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut opt = Adam::new(2, AdamSettings::default());
        let mut p = vec![1.0f64, -2.0];
        opt.step(&mut p, &[0.3, -5.0], 0.01);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 1.99).abs() < 1e-9);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = Adam::new(3, AdamSettings::default());
        let mut p = vec![3.0f32, -1.0, 0.5];
        for _ in 0..2000 {
            let g: Vec<f32> = p.iter().map(|x| 2.0 * (x - 1.0)).collect();
            opt.step(&mut p, &g, 0.01);
        }
        assert!(p.iter().all(|x| (x - 1.0).abs() < 1e-2), "{p:?}");
    }

    #[test]
    fn zero_rate_is_a_no_op() {
        let mut opt = Adam::new(2, AdamSettings::default());
        let mut p = vec![-0.0f32, 1.5];
        opt.step(&mut p, &[1.0, -1.0], 0.0);
        assert_eq!(p[0].to_bits(), (-0.0f32).to_bits());
        assert_eq!(p[1], 1.5);
    }
}
