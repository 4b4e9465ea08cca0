use serde::{Deserialize, Serialize};

use crate::params::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> =
            store.entries().iter().map(|e| if e.trainable { vec![0.0; e.value.len()] } else { Vec::new() }).collect();
        Self { config, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads, lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (id, entry) in store.entries_mut().iter_mut().enumerate() {
            if !entry.trainable {
                continue;
            }
            let g = grads.get(id);
            let (m, v) = (&mut self.m[id], &mut self.v[id]);
            for i in 0..entry.value.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                entry.value[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

/// `lr0 * decay^floor(epoch / every)`.
pub fn step_decay(lr0: f64, decay: f64, every: usize, epoch: usize) -> f64 {
    lr0 * decay.powi((epoch / every) as i32)
}
