use ndarray::Array4;
use serde::{Deserialize, Serialize};

use super::graph::ParamStore;

/// Adam hyperparameters with linear warmup and step decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub warmup_steps: u64,
    pub decay_rate: f64,
    pub decay_interval: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            warmup_steps: 1000,
            decay_rate: 0.9,
            decay_interval: u64::MAX,
        }
    }
}

impl AdamConfig {
    /// Learning rate used by update number `step` (1-based).
    pub fn lr_at(&self, step: u64) -> f64 {
        let ramp = if self.warmup_steps == 0 {
            1.0
        } else {
            (step as f64 / self.warmup_steps as f64).min(1.0)
        };
        let decays = step / self.decay_interval.max(1);
        self.learning_rate * ramp * self.decay_rate.powf(decays as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Array4<f64>>,
    pub v: Vec<Array4<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros: Vec<Array4<f64>> = params.ids().map(|id| Array4::zeros(params.value(id).raw_dim())).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update from the gradients held in `params`; returns the
    /// learning rate used.
    pub fn step(&mut self, params: &mut ParamStore) -> f64 {
        self.step += 1;
        let c = &self.config;
        let lr = c.lr_at(self.step);
        let bc1 = 1.0 - c.beta1.powf(self.step as f64);
        let bc2 = 1.0 - c.beta2.powf(self.step as f64);
        let ids: Vec<_> = params.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let g = params.grad(id).clone();
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            m.zip_mut_with(&g, |m, &g| *m = c.beta1 * *m + (1.0 - c.beta1) * g);
            v.zip_mut_with(&g, |v, &g| *v = c.beta2 * *v + (1.0 - c.beta2) * g * g);
            let p = params.value_mut(id);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                let mh = m / bc1;
                let vh = v / bc2;
                *p -= lr * mh / (vh.sqrt() + c.eps);
            });
        }
        lr
    }
}
