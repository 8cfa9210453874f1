use super::params::Parameterized;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment estimates for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameterized>(params: &P, config: AdamConfig) -> Self {
        let shapes: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            config,
            step: 0,
            first: shapes.clone(),
            second: shapes,
        }
    }

    /// One bias-corrected Adam step.
    pub fn update<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        let mut tensors = params.tensors_mut();
        if tensors.len() != self.first.len()
            || grads.len() != tensors.len()
            || tensors
                .iter()
                .zip(&grads)
                .zip(&self.first)
                .any(|((p, g), m)| p.len() != g.len() || p.len() != m.len())
        {
            return Err(Error::Shape("adam state does not match parameters".into()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in tensors
            .iter_mut()
            .zip(&grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for k in 0..p.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                p[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the original norm.
pub fn clip_grad_norm<P: Parameterized>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::DenseParams;

    fn scalar(v: f64) -> DenseParams {
        let mut p = DenseParams::zeros(1, 1);
        p.weights[0] = v;
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.7, -0.02] {
            let mut p = scalar(1.0);
            let mut adam = AdamState::new(&p, AdamConfig::with_learning_rate(0.01));
            adam.update(&mut p, &scalar(g)).unwrap();
            let moved = 1.0 - p.weights[0];
            assert!((moved - 0.01 * g.signum()).abs() < 1e-6, "{moved}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(0.5);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.update(&mut p, &scalar(0.0)).unwrap();
        assert_eq!(p.weights[0], 0.5);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn identical_runs_are_identical() {
        let run = || {
            let mut p = scalar(0.5);
            let mut adam = AdamState::new(&p, AdamConfig::with_learning_rate(0.01));
            for k in 0..20 {
                adam.update(&mut p, &scalar((k as f64).sin())).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = scalar(0.0);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        assert!(adam.update(&mut p, &DenseParams::zeros(2, 1)).is_err());
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = DenseParams::zeros(2, 1);
        g.weights = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g.weights[0] - 0.6).abs() < 1e-15);
    }
}
