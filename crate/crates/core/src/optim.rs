//! First-order optimizers and the training loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: OptimizerKind,
    pub learning_rate: f64,
    pub iterations: usize,
    /// Learning rate is multiplied by `decay_rate` every `decay_steps` iterations (smoothly).
    pub decay_rate: f64,
    pub decay_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            name: OptimizerKind::Adam,
            learning_rate: 1e-3,
            iterations: 10_000,
            decay_rate: 1.0,
            decay_steps: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iteration budget must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) || self.decay_steps == 0 {
            return Err(Error::Config("decay_rate must lie in (0, 1] and decay_steps be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::Config("invalid Adam moment parameters".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        if self.decay_rate == 1.0 {
            self.learning_rate
        } else {
            self.learning_rate * self.decay_rate.powf(iteration as f64 / self.decay_steps as f64)
        }
    }
}

/// Optimizer state for one parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig, n_params: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        })
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let c = &self.config;
        let lr = c.learning_rate_at(self.step);
        self.step += 1;
        match c.name {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
                    self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
                    let mhat = self.m[i] / bc1;
                    let vhat = self.v[i] / bc2;
                    params[i] -= lr * mhat / (vhat.sqrt() + c.epsilon);
                }
            }
        }
    }
}

/// Runs `config.iterations` optimizer steps on `params`.
///
/// The returned history holds the loss before every step followed by the
/// loss at the returned parameters, so it has `iterations + 1` entries.
pub fn train(
    params: &mut [f64],
    mut loss: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let mut opt = Optimizer::new(config, params.len())?;
    let mut history = Vec::with_capacity(config.iterations + 1);
    for iteration in 0..=config.iterations {
        let (value, grad) = loss(params)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration });
        }
        history.push(value);
        if iteration < config.iterations {
            opt.step(params, &grad);
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(target: &[f64]) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> + '_ {
        move |p: &[f64]| {
            let v = p.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum();
            let g = p.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
            Ok((v, g))
        }
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let target = [0.5, -1.25, 2.0];
        let mut p = vec![0.0; 3];
        let cfg = OptimizerConfig {
            learning_rate: 5e-2,
            iterations: 2000,
            decay_rate: 0.5,
            decay_steps: 400,
            ..Default::default()
        };
        let hist = train(&mut p, quadratic(&target), &cfg).unwrap();
        assert_eq!(hist.len(), 2001);
        for (a, b) in p.iter().zip(&target) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let target = [1.0, 2.0];
        let cfg = OptimizerConfig {
            iterations: 50,
            ..Default::default()
        };
        let mut a = vec![0.3, 0.1];
        let mut b = a.clone();
        let ha = train(&mut a, quadratic(&target), &cfg).unwrap();
        let hb = train(&mut b, quadratic(&target), &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_loss_reports_iteration() {
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            iterations: 100,
            name: OptimizerKind::Sgd,
            ..Default::default()
        };
        let mut p = vec![1.0];
        let mut calls = 0;
        let err = train(
            &mut p,
            |_| {
                calls += 1;
                Ok((if calls == 4 { f64::NAN } else { 1.0 }, vec![0.0]))
            },
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { iteration: 3 }));
    }

    #[test]
    fn rejects_zero_budget() {
        let cfg = OptimizerConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
