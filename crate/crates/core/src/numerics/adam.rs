use super::ParamStore;
use crate::error::{Error, Result};

/// Adam optimizer with bias correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Applies one update to every non-frozen parameter from its accumulated
    /// gradient. Nothing is modified if any trainable gradient holds a NaN.
    pub fn step(&self, store: &mut ParamStore) -> Result<()> {
        for (_, p) in store.iter() {
            if !p.frozen && p.grad.data().iter().any(|g| g.is_nan()) {
                return Err(Error::NanGradient(p.name.clone()));
            }
        }
        for p in store.iter_mut().filter(|p| !p.frozen) {
            p.step_count += 1;
            let t = p.step_count as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let grad = p.grad.data();
            let m = p.adam_m.data_mut();
            for (mi, gi) in m.iter_mut().zip(grad) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
            }
            let v = p.adam_v.data_mut();
            for (vi, gi) in v.iter_mut().zip(grad) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
            }
            let (m, v) = (p.adam_m.data(), p.adam_v.data());
            let lr = self.lr;
            let eps = self.eps;
            let updates: Vec<f64> = m
                .iter()
                .zip(v)
                .map(|(mi, vi)| lr * (mi / c1) / ((vi / c2).sqrt() + eps))
                .collect();
            for (x, u) in p.value.data_mut().iter_mut().zip(updates) {
                *x -= u;
            }
        }
        Ok(())
    }
}
