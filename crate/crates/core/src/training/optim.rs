use std::collections::BTreeMap;

use crate::autodiff::ParamStore;

/// AdamW with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every tensor in `params` from its stored gradient.
    /// Tensors without a gradient are treated as having a zero gradient.
    ///
    /// `θ ← θ − lr·wd·θ`, then `θ ← θ − lr·m̂ / (√v̂ + eps)`.
    pub fn step(&mut self, params: &mut ParamStore, lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, tensor) in params.iter_mut() {
            let n = tensor.len();
            let grad = tensor.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
            let (m, v) = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            for (i, theta) in tensor.data_mut().iter_mut().enumerate() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                *theta -= lr * self.weight_decay * *theta;
                *theta -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}
